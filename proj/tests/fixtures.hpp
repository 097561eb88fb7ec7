#pragma once

// Hand-built examples shared by the unit tests. Deliberately independent of
// the library registry so the two act as separate sources.

#include "hlap/distribution.hpp"

#include <vector>

namespace fx {

using namespace hlap;

inline const Chart& xy()
{
    static const Chart c({"x", "y"});
    return c;
}

inline const Chart& xyz()
{
    static const Chart c({"x", "y", "z"});
    return c;
}

inline const Chart& line()
{
    static const Chart c({"x"});
    return c;
}

inline Expr E(const char* s, const Chart& c = xy())
{
    return parse_expr(s, c);
}

inline VectorField field(const Chart& c, std::vector<const char*> coeffs)
{
    ExprVec v;
    for (const char* s : coeffs)
        v.push_back(parse_expr(s, c));
    return VectorField(c, v);
}

inline Distribution grushin()
{
    return Distribution(xy(), {field(xy(), {"1", "0"}), field(xy(), {"0", "x"})}, "grushin");
}

inline Distribution pathological()
{
    return Distribution(xy(), {field(xy(), {"1", "0"}), field(xy(), {"0", "flatplus(x)"})}, "pathological");
}

inline Distribution gl2()
{
    return Distribution(xy(),
                        {field(xy(), {"x", "0"}), field(xy(), {"0", "x"}), field(xy(), {"y", "0"}),
                         field(xy(), {"0", "y"})},
                        "gl2");
}

inline Distribution heisenberg()
{
    return Distribution(xyz(), {field(xyz(), {"1", "0", "-1/2*y"}), field(xyz(), {"0", "1", "1/2*x"})},
                        "heisenberg");
}

inline Distribution martinet()
{
    return Distribution(xyz(), {field(xyz(), {"1", "0", "0"}), field(xyz(), {"0", "1", "1/2*x^2"})}, "martinet");
}

inline Distribution bump_line()
{
    return Distribution(line(), {field(line(), {"piecewise(x > 1; 0; piecewise(x > -1; (1 - x^2)^4; 0))"})},
                        "bump_line");
}

inline Distribution flat_plane()
{
    return Distribution(xy(), {field(xy(), {"1", "0"}), field(xy(), {"0", "1"})}, "plane");
}

} // namespace fx
