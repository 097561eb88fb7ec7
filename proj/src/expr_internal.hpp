#pragma once

#include "hlap/expr.hpp"

namespace hlap::detail {

struct Node {
    bool pw = false;
    int pw_var = -1;
    Rational pw_cut;
    NodePtr pw_then;
    NodePtr pw_else;
    std::vector<Term> terms;
    bool has_flat_or_pw = false; // cached: restrict_to is a no-op when false
};

int cmp_node(const Node* a, const Node* b);
int cmp_factor_key(const Factor& a, const Factor& b);
int mono_cmp(const std::vector<Factor>& a, const std::vector<Factor>& b);

NodePtr build_sum(std::vector<Term> terms);
NodePtr term_node(Term t);
const NodePtr& zero_node();

} // namespace hlap::detail
