#pragma once

// Symbolic bit-vector / boolean expressions.
//
// An Expr is an immutable tree shared by reference. Widths are in bits and
// restricted to {1, 8, 16, 32, 64}; comparisons and boolean negation produce
// width-1 values. Construction validates operand widths and throws ExprError
// on mismatch, so every Expr in existence is well formed.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "patchprobe/error.hpp"

namespace patchprobe {

enum class ExprKind : std::uint8_t { Sym, BinOp, UnOp, Cmp, BoolNot, Cast, Wildcard, Const };

enum class BinOpKind : std::uint8_t { Add, Sub, Mul, And, Or, Xor, Shl, Shr, Sar };
enum class UnOpKind : std::uint8_t { Neg, Not };
enum class Rel : std::uint8_t { Eq, Ne, Slt, Sle, Sgt, Sge, Ult, Ule };
enum class CastKind : std::uint8_t { ZExt, Trunc };

inline const char* to_string(BinOpKind op) {
    switch (op) {
    case BinOpKind::Add: return "add";
    case BinOpKind::Sub: return "sub";
    case BinOpKind::Mul: return "mul";
    case BinOpKind::And: return "and";
    case BinOpKind::Or: return "or";
    case BinOpKind::Xor: return "xor";
    case BinOpKind::Shl: return "shl";
    case BinOpKind::Shr: return "shr";
    case BinOpKind::Sar: return "sar";
    }
    return "?";
}

inline const char* to_string(UnOpKind op) { return op == UnOpKind::Neg ? "neg" : "not"; }

inline const char* to_string(Rel rel) {
    switch (rel) {
    case Rel::Eq: return "eq";
    case Rel::Ne: return "ne";
    case Rel::Slt: return "slt";
    case Rel::Sle: return "sle";
    case Rel::Sgt: return "sgt";
    case Rel::Sge: return "sge";
    case Rel::Ult: return "ult";
    case Rel::Ule: return "ule";
    }
    return "?";
}

inline std::optional<BinOpKind> binop_from_string(std::string_view s);
inline std::optional<Rel> rel_from_string(std::string_view s);

inline bool is_commutative(BinOpKind op) {
    return op == BinOpKind::Add || op == BinOpKind::Mul || op == BinOpKind::And ||
           op == BinOpKind::Or || op == BinOpKind::Xor;
}

inline std::string hex(std::uint64_t v) {
    static const char digits[] = "0123456789abcdef";
    std::string out;
    do {
        out.insert(out.begin(), digits[v & 0xf]);
        v >>= 4;
    } while (v != 0);
    return "0x" + out;
}

inline bool is_valid_width(unsigned w) { return w == 1 || w == 8 || w == 16 || w == 32 || w == 64; }

inline std::uint64_t width_mask(unsigned w) { return w >= 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << w) - 1); }

/// Interprets the low `w` bits of `v` as a two's-complement number.
inline std::int64_t to_signed(std::uint64_t v, unsigned w) {
    v &= width_mask(w);
    if (w < 64 && (v >> (w - 1)) & 1) return static_cast<std::int64_t>(v | ~width_mask(w));
    return static_cast<std::int64_t>(v);
}

class Expr {
public:
    Expr() = default;

    static Expr constant(std::uint64_t value, unsigned width);
    static Expr symbol(std::string name, unsigned width);
    static Expr binop(BinOpKind op, Expr lhs, Expr rhs);
    static Expr unop(UnOpKind op, Expr operand);
    static Expr cmp(Rel rel, Expr lhs, Expr rhs);
    static Expr bool_not(Expr operand);
    static Expr cast(CastKind kind, unsigned to_width, Expr operand);
    static Expr wildcard();

    explicit operator bool() const noexcept { return node_ != nullptr; }

    ExprKind kind() const;
    unsigned width() const;
    std::uint64_t value() const;
    std::int64_t signed_value() const;
    const std::string& name() const;
    BinOpKind binop_kind() const;
    UnOpKind unop_kind() const;
    Rel rel() const;
    CastKind cast_kind() const;
    const Expr& lhs() const;
    const Expr& rhs() const;
    const Expr& operand() const;
    std::size_t hash() const;

    bool is_const() const;
    bool is_sym() const;
    bool is_wildcard() const;
    bool same_node(const Expr& other) const noexcept { return node_ == other.node_; }

    friend bool operator==(const Expr& a, const Expr& b);
    friend bool operator!=(const Expr& a, const Expr& b) { return !(a == b); }

private:
    struct Node;

    const Node& node() const;

    static Expr make(Node n);

    std::shared_ptr<const Node> node_;
};

struct Expr::Node {
    ExprKind kind{};
    std::uint8_t op = 0;
    unsigned width = 0;
    std::uint64_t value = 0;
    std::string name;
    Expr lhs;
    Expr rhs;
    std::size_t hash = 0;
};

inline const Expr::Node& Expr::node() const {
    if (!node_) throw ExprError("use of an empty expression");
    return *node_;
}

inline ExprKind Expr::kind() const { return node().kind; }
inline unsigned Expr::width() const { return node().width; }
inline std::uint64_t Expr::value() const { return node().value; }
inline std::int64_t Expr::signed_value() const { return to_signed(node().value, node().width); }
inline const std::string& Expr::name() const { return node().name; }
inline BinOpKind Expr::binop_kind() const { return static_cast<BinOpKind>(node().op); }
inline UnOpKind Expr::unop_kind() const { return static_cast<UnOpKind>(node().op); }
inline Rel Expr::rel() const { return static_cast<Rel>(node().op); }
inline CastKind Expr::cast_kind() const { return static_cast<CastKind>(node().op); }
inline const Expr& Expr::lhs() const { return node().lhs; }
inline const Expr& Expr::rhs() const { return node().rhs; }
inline const Expr& Expr::operand() const { return node().lhs; }
inline std::size_t Expr::hash() const { return node().hash; }
inline bool Expr::is_const() const { return node_ && node_->kind == ExprKind::Const; }
inline bool Expr::is_sym() const { return node_ && node_->kind == ExprKind::Sym; }
inline bool Expr::is_wildcard() const { return node_ && node_->kind == ExprKind::Wildcard; }

namespace detail {
inline std::size_t hash_mix(std::size_t seed, std::size_t v) {
    return seed ^ (v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
}
} // namespace detail

inline Expr Expr::make(Node n) {
    std::size_t h = std::hash<int>{}(static_cast<int>(n.kind));
    h = detail::hash_mix(h, n.op);
    h = detail::hash_mix(h, n.width);
    h = detail::hash_mix(h, std::hash<std::uint64_t>{}(n.value));
    h = detail::hash_mix(h, std::hash<std::string>{}(n.name));
    if (n.lhs) h = detail::hash_mix(h, n.lhs.hash());
    if (n.rhs) h = detail::hash_mix(h, n.rhs.hash());
    n.hash = h;
    Expr e;
    e.node_ = std::make_shared<const Node>(std::move(n));
    return e;
}

inline Expr Expr::constant(std::uint64_t value, unsigned width) {
    if (!is_valid_width(width)) throw ExprError("invalid constant width " + std::to_string(width));
    Node n;
    n.kind = ExprKind::Const;
    n.width = width;
    n.value = value & width_mask(width);
    return make(std::move(n));
}

inline Expr Expr::symbol(std::string name, unsigned width) {
    if (!is_valid_width(width)) throw ExprError("invalid symbol width " + std::to_string(width));
    if (name.empty()) throw ExprError("empty symbol name");
    Node n;
    n.kind = ExprKind::Sym;
    n.width = width;
    n.name = std::move(name);
    return make(std::move(n));
}

inline Expr Expr::wildcard() {
    Node n;
    n.kind = ExprKind::Wildcard;
    return make(std::move(n));
}

namespace detail {
inline void require_operand(const Expr& e, const char* what) {
    if (!e) throw ExprError(std::string("missing operand to ") + what);
    if (e.is_wildcard()) throw ExprError(std::string("wildcard is not allowed inside ") + what);
}
} // namespace detail

inline Expr Expr::binop(BinOpKind op, Expr lhs, Expr rhs) {
    detail::require_operand(lhs, to_string(op));
    detail::require_operand(rhs, to_string(op));
    if (lhs.width() != rhs.width())
        throw ExprError(std::string("width mismatch in ") + to_string(op) + ": " + std::to_string(lhs.width()) +
                        " vs " + std::to_string(rhs.width()));
    Node n;
    n.kind = ExprKind::BinOp;
    n.op = static_cast<std::uint8_t>(op);
    n.width = lhs.width();
    n.lhs = std::move(lhs);
    n.rhs = std::move(rhs);
    return make(std::move(n));
}

inline Expr Expr::unop(UnOpKind op, Expr operand) {
    detail::require_operand(operand, to_string(op));
    Node n;
    n.kind = ExprKind::UnOp;
    n.op = static_cast<std::uint8_t>(op);
    n.width = operand.width();
    n.lhs = std::move(operand);
    return make(std::move(n));
}

inline Expr Expr::cmp(Rel rel, Expr lhs, Expr rhs) {
    detail::require_operand(lhs, to_string(rel));
    detail::require_operand(rhs, to_string(rel));
    if (lhs.width() != rhs.width())
        throw ExprError(std::string("width mismatch in ") + to_string(rel) + ": " + std::to_string(lhs.width()) +
                        " vs " + std::to_string(rhs.width()));
    Node n;
    n.kind = ExprKind::Cmp;
    n.op = static_cast<std::uint8_t>(rel);
    n.width = 1;
    n.lhs = std::move(lhs);
    n.rhs = std::move(rhs);
    return make(std::move(n));
}

inline Expr Expr::bool_not(Expr operand) {
    detail::require_operand(operand, "boolean not");
    if (operand.width() != 1) throw ExprError("boolean not applied to a width-" + std::to_string(operand.width()) + " value");
    Node n;
    n.kind = ExprKind::BoolNot;
    n.width = 1;
    n.lhs = std::move(operand);
    return make(std::move(n));
}

inline Expr Expr::cast(CastKind kind, unsigned to_width, Expr operand) {
    detail::require_operand(operand, "cast");
    if (!is_valid_width(to_width)) throw ExprError("invalid cast width " + std::to_string(to_width));
    if (kind == CastKind::ZExt && to_width <= operand.width())
        throw ExprError("zero-extension must widen");
    if (kind == CastKind::Trunc && to_width >= operand.width())
        throw ExprError("truncation must narrow");
    Node n;
    n.kind = ExprKind::Cast;
    n.op = static_cast<std::uint8_t>(kind);
    n.width = to_width;
    n.lhs = std::move(operand);
    return make(std::move(n));
}

inline bool operator==(const Expr& a, const Expr& b) {
    if (a.node_ == b.node_) return true;
    if (!a.node_ || !b.node_) return false;
    const auto& x = *a.node_;
    const auto& y = *b.node_;
    if (x.hash != y.hash || x.kind != y.kind || x.op != y.op || x.width != y.width || x.value != y.value ||
        x.name != y.name)
        return false;
    return x.lhs == y.lhs && x.rhs == y.rhs;
}

/// Total structural order. Constants sort last so canonical commutative
/// operations read `(add x c)`.
inline int compare(const Expr& a, const Expr& b) {
    if (a.same_node(b)) return 0;
    if (!a) return b ? -1 : 0;
    if (!b) return 1;
    auto three = [](auto x, auto y) { return x < y ? -1 : (y < x ? 1 : 0); };
    if (int c = three(a.kind(), b.kind())) return c;
    if (int c = three(a.width(), b.width())) return c;
    switch (a.kind()) {
    case ExprKind::Const: return three(a.value(), b.value());
    case ExprKind::Sym: return a.name().compare(b.name()) < 0 ? -1 : (a.name() == b.name() ? 0 : 1);
    case ExprKind::Wildcard: return 0;
    case ExprKind::BinOp:
        if (int c = three(a.binop_kind(), b.binop_kind())) return c;
        break;
    case ExprKind::UnOp:
        if (int c = three(a.unop_kind(), b.unop_kind())) return c;
        break;
    case ExprKind::Cmp:
        if (int c = three(a.rel(), b.rel())) return c;
        break;
    case ExprKind::Cast:
        if (int c = three(a.cast_kind(), b.cast_kind())) return c;
        break;
    case ExprKind::BoolNot: break;
    }
    if (int c = compare(a.lhs(), b.lhs())) return c;
    return compare(a.rhs(), b.rhs());
}

struct ExprLess {
    bool operator()(const Expr& a, const Expr& b) const { return compare(a, b) < 0; }
};

struct ExprHash {
    std::size_t operator()(const Expr& e) const { return e ? e.hash() : 0; }
};

// ---------------------------------------------------------------------------
// Queries

/// Calls `fn` on every node of `e`, parents before children.
inline void visit(const Expr& e, const std::function<void(const Expr&)>& fn) {
    if (!e) return;
    fn(e);
    visit(e.lhs(), fn);
    visit(e.rhs(), fn);
}

inline bool contains_wildcard(const Expr& e) {
    bool found = false;
    visit(e, [&](const Expr& n) { found = found || n.is_wildcard(); });
    return found;
}

/// Free symbols with their widths.
inline std::map<std::string, unsigned> free_symbols(const Expr& e) {
    std::map<std::string, unsigned> out;
    visit(e, [&](const Expr& n) {
        if (n.is_sym()) out.emplace(n.name(), n.width());
    });
    return out;
}

/// True if `needle` occurs anywhere inside `hay` (including hay itself).
inline bool contains_subexpr(const Expr& hay, const Expr& needle) {
    if (!hay || !needle) return false;
    if (hay.hash() == needle.hash() && hay == needle) return true;
    return contains_subexpr(hay.lhs(), needle) || contains_subexpr(hay.rhs(), needle);
}

// ---------------------------------------------------------------------------
// Evaluation

using Assignment = std::map<std::string, std::uint64_t>;

namespace detail {

inline std::uint64_t eval_binop(BinOpKind op, std::uint64_t a, std::uint64_t b, unsigned w) {
    const std::uint64_t m = width_mask(w);
    switch (op) {
    case BinOpKind::Add: return (a + b) & m;
    case BinOpKind::Sub: return (a - b) & m;
    case BinOpKind::Mul: return (a * b) & m;
    case BinOpKind::And: return a & b;
    case BinOpKind::Or: return a | b;
    case BinOpKind::Xor: return a ^ b;
    case BinOpKind::Shl: return b >= w ? 0 : (a << b) & m;
    case BinOpKind::Shr: return b >= w ? 0 : (a >> b);
    case BinOpKind::Sar: {
        const std::int64_t s = to_signed(a, w);
        if (b >= w) return s < 0 ? m : 0;
        return static_cast<std::uint64_t>(s >> b) & m;
    }
    }
    return 0;
}

inline bool eval_rel(Rel rel, std::uint64_t a, std::uint64_t b, unsigned w) {
    switch (rel) {
    case Rel::Eq: return a == b;
    case Rel::Ne: return a != b;
    case Rel::Slt: return to_signed(a, w) < to_signed(b, w);
    case Rel::Sle: return to_signed(a, w) <= to_signed(b, w);
    case Rel::Sgt: return to_signed(a, w) > to_signed(b, w);
    case Rel::Sge: return to_signed(a, w) >= to_signed(b, w);
    case Rel::Ult: return a < b;
    case Rel::Ule: return a <= b;
    }
    return false;
}

inline std::uint64_t eval_unop(UnOpKind op, std::uint64_t a, unsigned w) {
    return (op == UnOpKind::Neg ? (~a + 1) : ~a) & width_mask(w);
}

inline unsigned effective_width(unsigned native, unsigned override_width) {
    if (override_width == 0 || native == 1) return native;
    return override_width;
}

inline std::uint64_t evaluate_impl(const Expr& e, const Assignment& env, unsigned ow) {
    const unsigned w = effective_width(e.width(), ow);
    switch (e.kind()) {
    case ExprKind::Const: return e.value() & width_mask(w);
    case ExprKind::Sym: {
        auto it = env.find(e.name());
        if (it == env.end()) throw ExprError("unbound symbol " + e.name());
        return it->second & width_mask(w);
    }
    case ExprKind::BinOp:
        return eval_binop(e.binop_kind(), evaluate_impl(e.lhs(), env, ow), evaluate_impl(e.rhs(), env, ow), w);
    case ExprKind::UnOp: return eval_unop(e.unop_kind(), evaluate_impl(e.operand(), env, ow), w);
    case ExprKind::Cmp: {
        const unsigned ow_operand = effective_width(e.lhs().width(), ow);
        return eval_rel(e.rel(), evaluate_impl(e.lhs(), env, ow), evaluate_impl(e.rhs(), env, ow), ow_operand) ? 1 : 0;
    }
    case ExprKind::BoolNot: return evaluate_impl(e.operand(), env, ow) ? 0 : 1;
    case ExprKind::Cast: {
        const std::uint64_t v = evaluate_impl(e.operand(), env, ow);
        return v & width_mask(w);
    }
    case ExprKind::Wildcard: throw ExprError("cannot evaluate a wildcard");
    }
    return 0;
}

} // namespace detail

/// Modular evaluation. With `width_override` = 0 every node is evaluated at
/// its own width; otherwise every non-boolean node is evaluated at the
/// override width and casts become the identity. Comparisons yield 0 or 1.
inline std::uint64_t evaluate(const Expr& e, const Assignment& env, unsigned width_override = 0) {
    if (width_override != 0 && !is_valid_width(width_override))
        throw ExprError("invalid override width " + std::to_string(width_override));
    return detail::evaluate_impl(e, env, width_override);
}

// ---------------------------------------------------------------------------
// Canonicalization

namespace detail {

inline Expr mk_const(std::uint64_t v, unsigned w) { return Expr::constant(v, w); }

inline bool is_const_value(const Expr& e, std::uint64_t v) { return e.is_const() && e.value() == (v & width_mask(e.width())); }

inline Expr canon_add(Expr l, Expr r);
inline Expr canon_binop(BinOpKind op, Expr l, Expr r);

inline Expr order_commutative(BinOpKind op, Expr l, Expr r) {
    if (compare(r, l) < 0) std::swap(l, r);
    return Expr::binop(op, std::move(l), std::move(r));
}

inline Expr canon_binop(BinOpKind op, Expr l, Expr r) {
    const unsigned w = l.width();
    if (l.is_const() && r.is_const()) return mk_const(eval_binop(op, l.value(), r.value(), w), w);

    switch (op) {
    case BinOpKind::Sub:
        if (l == r) return mk_const(0, w);
        if (r.is_const()) return canon_binop(BinOpKind::Add, l, mk_const(~r.value() + 1, w));
        return Expr::binop(op, l, r);
    case BinOpKind::Add:
    case BinOpKind::Mul:
    case BinOpKind::And:
    case BinOpKind::Or:
    case BinOpKind::Xor: {
        if (l.is_const() && !r.is_const()) std::swap(l, r);
        if (r.is_const()) {
            // Fold (x op c1) op c2 into x op (c1 op c2).
            if (l.kind() == ExprKind::BinOp && l.binop_kind() == op && l.rhs().is_const()) {
                return canon_binop(op, l.lhs(), mk_const(eval_binop(op, l.rhs().value(), r.value(), w), w));
            }
            if (op == BinOpKind::Add && r.value() == 0) return l;
            if (op == BinOpKind::Mul && r.value() == 1) return l;
            if (op == BinOpKind::Mul && r.value() == 0) return r;
            if (op == BinOpKind::And && r.value() == 0) return r;
            if (op == BinOpKind::And && r.value() == width_mask(w)) return l;
            if (op == BinOpKind::Or && r.value() == 0) return l;
            if (op == BinOpKind::Or && r.value() == width_mask(w)) return r;
            if (op == BinOpKind::Xor && r.value() == 0) return l;
        }
        if (l == r) {
            if (op == BinOpKind::And || op == BinOpKind::Or) return l;
            if (op == BinOpKind::Xor) return mk_const(0, w);
        }
        return order_commutative(op, std::move(l), std::move(r));
    }
    case BinOpKind::Shl:
    case BinOpKind::Shr:
    case BinOpKind::Sar:
        if (r.is_const() && r.value() == 0) return l;
        if (l.is_const() && l.value() == 0) return l;
        return Expr::binop(op, l, r);
    }
    return Expr::binop(op, l, r);
}

inline Expr canon_unop(UnOpKind op, Expr a) {
    const unsigned w = a.width();
    if (op == UnOpKind::Not && w == 1) {
        if (a.is_const()) return mk_const(a.value() ^ 1, 1);
        if (a.kind() == ExprKind::BoolNot) return a.operand();
        return Expr::bool_not(std::move(a));
    }
    if (a.is_const()) return mk_const(eval_unop(op, a.value(), w), w);
    if (a.kind() == ExprKind::UnOp && a.unop_kind() == op) return a.operand();
    return Expr::unop(op, std::move(a));
}

inline std::int64_t signed_max(unsigned w) { return static_cast<std::int64_t>(width_mask(w) >> 1); }
inline std::int64_t signed_min(unsigned w) { return -signed_max(w) - 1; }

inline Expr canon_cmp(Rel rel, Expr l, Expr r) {
    const unsigned w = l.width();
    if (l.is_const() && r.is_const()) return mk_const(eval_rel(rel, l.value(), r.value(), w) ? 1 : 0, 1);
    // Flip greater-than forms so only eq/ne/slt/sle/ult/ule remain.
    if (rel == Rel::Sgt) return canon_cmp(Rel::Slt, r, l);
    if (rel == Rel::Sge) return canon_cmp(Rel::Sle, r, l);
    if (l == r) {
        const bool reflexive = rel == Rel::Eq || rel == Rel::Sle || rel == Rel::Ule;
        return mk_const(reflexive ? 1 : 0, 1);
    }
    if (rel == Rel::Eq || rel == Rel::Ne) {
        if (compare(r, l) < 0) std::swap(l, r);
        return Expr::cmp(rel, l, r);
    }
    // a <= c  ==>  a < c+1 ; c <= a  ==>  c-1 < a  (when no overflow)
    if (rel == Rel::Sle) {
        if (r.is_const() && r.signed_value() != signed_max(w))
            return Expr::cmp(Rel::Slt, l, mk_const(r.value() + 1, w));
        if (l.is_const() && l.signed_value() != signed_min(w))
            return Expr::cmp(Rel::Slt, mk_const(l.value() - 1, w), r);
    }
    if (rel == Rel::Ule) {
        if (r.is_const() && r.value() != width_mask(w)) return Expr::cmp(Rel::Ult, l, mk_const(r.value() + 1, w));
        if (l.is_const() && l.value() != 0) return Expr::cmp(Rel::Ult, mk_const(l.value() - 1, w), r);
    }
    return Expr::cmp(rel, l, r);
}

inline Expr canon_cast(CastKind kind, unsigned to, Expr a) {
    if (a.is_const()) return mk_const(a.value(), to);
    if (a.kind() == ExprKind::Cast) {
        const Expr& inner = a.operand();
        if (kind == CastKind::ZExt && a.cast_kind() == CastKind::ZExt) return Expr::cast(CastKind::ZExt, to, inner);
        if (kind == CastKind::Trunc && a.cast_kind() == CastKind::Trunc) return Expr::cast(CastKind::Trunc, to, inner);
        if (kind == CastKind::Trunc && a.cast_kind() == CastKind::ZExt) {
            if (inner.width() == to) return inner;
            if (inner.width() < to) return Expr::cast(CastKind::ZExt, to, inner);
            return Expr::cast(CastKind::Trunc, to, inner);
        }
    }
    return Expr::cast(kind, to, std::move(a));
}

} // namespace detail

/// Canonical representative: constants folded, commutative operands sorted,
/// `x - c` turned into `x + (-c)`, double negations removed, `<=` against a
/// constant rewritten to `<`, greater-than forms flipped, and identity
/// elements dropped. Idempotent.
inline Expr canon(const Expr& e) {
    if (!e) throw ExprError("canon of an empty expression");
    switch (e.kind()) {
    case ExprKind::Const:
    case ExprKind::Sym:
    case ExprKind::Wildcard: return e;
    case ExprKind::BinOp: return detail::canon_binop(e.binop_kind(), canon(e.lhs()), canon(e.rhs()));
    case ExprKind::UnOp: return detail::canon_unop(e.unop_kind(), canon(e.operand()));
    case ExprKind::BoolNot: return detail::canon_unop(UnOpKind::Not, canon(e.operand()));
    case ExprKind::Cmp: return detail::canon_cmp(e.rel(), canon(e.lhs()), canon(e.rhs()));
    case ExprKind::Cast: return detail::canon_cast(e.cast_kind(), e.width(), canon(e.operand()));
    }
    return e;
}

// ---------------------------------------------------------------------------
// Text form: prefix notation, e.g. (not (slt R(h):32 3:32)), (add R(r1) 16:64).
// Symbols carry a :width suffix unless they are 64 bits wide.

inline std::string render(const Expr& e) {
    if (!e) return "<null>";
    switch (e.kind()) {
    case ExprKind::Const: {
        const unsigned w = e.width();
        std::string v;
        if (w > 1 && e.signed_value() < 0) {
            v = "-" + std::to_string((~e.value() + 1) & width_mask(w));
        } else {
            v = std::to_string(e.value());
        }
        return v + ":" + std::to_string(w);
    }
    case ExprKind::Sym: return e.width() == 64 ? e.name() : e.name() + ":" + std::to_string(e.width());
    case ExprKind::Wildcard: return "*";
    case ExprKind::BinOp:
        return std::string("(") + to_string(e.binop_kind()) + " " + render(e.lhs()) + " " + render(e.rhs()) + ")";
    case ExprKind::UnOp: return std::string("(") + to_string(e.unop_kind()) + " " + render(e.operand()) + ")";
    case ExprKind::Cmp: return std::string("(") + to_string(e.rel()) + " " + render(e.lhs()) + " " + render(e.rhs()) + ")";
    case ExprKind::BoolNot: return "(not " + render(e.operand()) + ")";
    case ExprKind::Cast:
        return std::string("(") + (e.cast_kind() == CastKind::ZExt ? "zext" : "trunc") + std::to_string(e.width()) + " " +
               render(e.operand()) + ")";
    }
    return "?";
}

inline std::optional<BinOpKind> binop_from_string(std::string_view s) {
    static const std::pair<std::string_view, BinOpKind> table[] = {
        {"add", BinOpKind::Add}, {"sub", BinOpKind::Sub}, {"mul", BinOpKind::Mul},
        {"and", BinOpKind::And}, {"or", BinOpKind::Or},   {"xor", BinOpKind::Xor},
        {"shl", BinOpKind::Shl}, {"shr", BinOpKind::Shr}, {"sar", BinOpKind::Sar},
    };
    for (const auto& [name, op] : table)
        if (name == s) return op;
    return std::nullopt;
}

inline std::optional<Rel> rel_from_string(std::string_view s) {
    static const std::pair<std::string_view, Rel> table[] = {
        {"eq", Rel::Eq},   {"ne", Rel::Ne},   {"slt", Rel::Slt}, {"sle", Rel::Sle},
        {"sgt", Rel::Sgt}, {"sge", Rel::Sge}, {"ult", Rel::Ult}, {"ule", Rel::Ule},
    };
    for (const auto& [name, rel] : table)
        if (name == s) return rel;
    return std::nullopt;
}

namespace detail {

class ExprReader {
public:
    explicit ExprReader(std::string_view text) : text_(text) {}

    Expr read_all() {
        Expr e = read();
        skip_ws();
        if (pos_ != text_.size()) fail("trailing characters");
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError(1, pos_ + 1, "expression: " + what + " in '" + std::string(text_) + "'");
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    std::string_view token() {
        skip_ws();
        const std::size_t start = pos_;
        while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) && text_[pos_] != '(' &&
               text_[pos_] != ')')
            ++pos_;
        return text_.substr(start, pos_ - start);
    }

    unsigned read_width() {
        if (pos_ >= text_.size() || text_[pos_] != ':') return 64;
        ++pos_;
        const std::size_t start = pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        if (start == pos_) fail("missing width");
        const unsigned w = static_cast<unsigned>(std::stoul(std::string(text_.substr(start, pos_ - start))));
        if (!is_valid_width(w)) fail("invalid width " + std::to_string(w));
        return w;
    }

    Expr read() {
        skip_ws();
        if (pos_ >= text_.size()) fail("unexpected end");
        const char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            const std::string op(token());
            Expr result;
            if (auto b = binop_from_string(op)) {
                Expr l = read();
                Expr r = read();
                result = Expr::binop(*b, l, r);
            } else if (auto rel = rel_from_string(op)) {
                Expr l = read();
                Expr r = read();
                result = Expr::cmp(*rel, l, r);
            } else if (op == "neg") {
                result = Expr::unop(UnOpKind::Neg, read());
            } else if (op == "not") {
                Expr a = read();
                result = a.width() == 1 ? Expr::bool_not(a) : Expr::unop(UnOpKind::Not, a);
            } else if (op.rfind("zext", 0) == 0 || op.rfind("trunc", 0) == 0) {
                const bool z = op[0] == 'z';
                const std::string digits = op.substr(z ? 4 : 5);
                if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](char d) { return std::isdigit(static_cast<unsigned char>(d)); }))
                    fail("bad cast '" + op + "'");
                result = Expr::cast(z ? CastKind::ZExt : CastKind::Trunc, static_cast<unsigned>(std::stoul(digits)), read());
            } else {
                fail("unknown operator '" + op + "'");
            }
            skip_ws();
            if (pos_ >= text_.size() || text_[pos_] != ')') fail("expected ')'");
            ++pos_;
            return result;
        }
        if (c == '*') {
            ++pos_;
            return Expr::wildcard();
        }
        if (c == '-' || std::isdigit(static_cast<unsigned char>(c))) {
            const bool neg = c == '-';
            if (neg) ++pos_;
            const std::size_t start = pos_;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
            if (start == pos_) fail("bad number");
            std::uint64_t v = std::stoull(std::string(text_.substr(start, pos_ - start)));
            if (neg) v = ~v + 1;
            if (pos_ >= text_.size() || text_[pos_] != ':') fail("constant without width");
            return Expr::constant(v, read_width());
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            const std::size_t start = pos_;
            while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
            if (pos_ < text_.size() && text_[pos_] == '(') {
                int depth = 0;
                do {
                    if (text_[pos_] == '(') ++depth;
                    if (text_[pos_] == ')') --depth;
                    ++pos_;
                } while (pos_ < text_.size() && depth > 0);
                if (depth != 0) fail("unbalanced symbol name");
            }
            std::string name(text_.substr(start, pos_ - start));
            return Expr::symbol(std::move(name), read_width());
        }
        fail(std::string("unexpected character '") + c + "'");
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

} // namespace detail

/// Inverse of render().
inline Expr parse_expr(std::string_view text) { return detail::ExprReader(text).read_all(); }

// Convenience builders used throughout the library and tests.
inline Expr sym(std::string name, unsigned width = 64) { return Expr::symbol(std::move(name), width); }
inline Expr cst(std::int64_t value, unsigned width = 64) { return Expr::constant(static_cast<std::uint64_t>(value), width); }

} // namespace patchprobe
