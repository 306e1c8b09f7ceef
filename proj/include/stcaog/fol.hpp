#pragma once

// First-order-logic view of an STC-AOG or of one parse graph.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stcaog/fusion.hpp"
#include "stcaog/parsing.hpp"

namespace stcaog {

struct FolExpr {
    enum class Kind { Atom, And, Or };

    Kind kind = Kind::Atom;
    std::string predicate;          // Atom
    std::vector<std::string> args;  // Atom; empty renders the bare predicate
    std::vector<FolExpr> children;  // And / Or

    static FolExpr atom(std::string predicate, std::vector<std::string> args = {});
    static FolExpr group(Kind kind, std::vector<FolExpr> children);

    bool operator==(const FolExpr&) const = default;
};

enum class Quantifier { ForAll, Exists };

struct FolSentence {
    std::vector<std::pair<Quantifier, std::string>> quantifiers;
    FolExpr body;
    std::optional<std::string> consequent;  // body → consequent

    bool operator==(const FolSentence&) const = default;
};

// Single line: quantifiers "∀x"/"∃x" separated by spaces, atoms "P(a, b)",
// connectives " ∧ ", " ∨ ", implication " → ". Nested groups with two or
// more children are parenthesized; a quantified body always is.
std::string render(const FolSentence& sentence);

// One sentence per line, numbered "1. ", "2. ", ...
std::string render_numbered(const std::vector<FolSentence>& sentences);

// C-layer sentence, then one sentence per linked C value (feature order),
// then one per decomposable operation (id order).
std::vector<FolSentence> describe_aog(const StcAog& aog);

// The same view restricted to the choices of `pg`; unselected C features
// render as "F(*)".
std::vector<FolSentence> describe_pg(const ParseGraph& pg, const StcAog& aog);

}  // namespace stcaog
