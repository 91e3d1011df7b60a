#pragma once

// Semantic equivalence of expressions.
//
// The built-in oracle decides in tiers: structural equality after canon();
// exhaustive evaluation at a reduced width when the expressions are small
// enough for that to be meaningful; randomized refutation at native width
// otherwise. A refutation always carries a native-width counterexample.
// EquivalenceOracle is the extension point for a real SMT backend.

#include <array>
#include <cstdint>
#include <mutex>
#include <optional>
#include <random>
#include <unordered_map>
#include <utility>
#include <vector>

#include "patchprobe/expr.hpp"

namespace patchprobe {

enum class EquivTier : std::uint8_t { Structural, Exhaustive, Sampled };

inline const char* to_string(EquivTier t) {
    switch (t) {
    case EquivTier::Structural: return "structural";
    case EquivTier::Exhaustive: return "exhaustive";
    case EquivTier::Sampled: return "sampled";
    }
    return "?";
}

struct EquivResult {
    bool equal = false;
    EquivTier tier = EquivTier::Structural;
    /// Present exactly when equal is false.
    std::optional<Assignment> counterexample;
};

struct OracleConfig {
    unsigned reduced_width = 8;
    std::size_t max_exhaustive_symbols = 3;
    std::size_t samples = 1024;
    /// Cheap native-width refutation attempted before the exhaustive tier.
    std::size_t quick_samples = 32;
    std::uint64_t seed = 0x5eed'5eed'5eedULL;
};

class EquivalenceOracle {
public:
    virtual ~EquivalenceOracle() = default;
    /// Throws ExprError on width mismatch or when either side holds a wildcard.
    virtual EquivResult check(const Expr& a, const Expr& b) = 0;
};

namespace detail {

/// Flat post-order program for fast repeated evaluation.
class CompiledExpr {
public:
    CompiledExpr(const Expr& e, const std::vector<std::string>& symbols, unsigned override_width)
        : ow_(override_width) {
        compile(e, symbols);
        regs_.resize(ops_.size());
    }

    std::uint64_t run(const std::uint64_t* values) {
        for (std::size_t i = 0; i < ops_.size(); ++i) {
            const Op& o = ops_[i];
            std::uint64_t r = 0;
            switch (o.kind) {
            case ExprKind::Const: r = o.imm; break;
            case ExprKind::Sym: r = values[o.slot] & width_mask(o.width); break;
            case ExprKind::BinOp: r = eval_binop(static_cast<BinOpKind>(o.op), regs_[o.a], regs_[o.b], o.width); break;
            case ExprKind::UnOp: r = eval_unop(static_cast<UnOpKind>(o.op), regs_[o.a], o.width); break;
            case ExprKind::Cmp: r = eval_rel(static_cast<Rel>(o.op), regs_[o.a], regs_[o.b], o.operand_width) ? 1 : 0; break;
            case ExprKind::BoolNot: r = regs_[o.a] ? 0 : 1; break;
            case ExprKind::Cast: r = regs_[o.a] & width_mask(o.width); break;
            case ExprKind::Wildcard: break;
            }
            regs_[i] = r;
        }
        return regs_.back();
    }

private:
    struct Op {
        ExprKind kind;
        std::uint8_t op = 0;
        unsigned width = 0;
        unsigned operand_width = 0;
        std::size_t a = 0;
        std::size_t b = 0;
        std::size_t slot = 0;
        std::uint64_t imm = 0;
    };

    std::size_t compile(const Expr& e, const std::vector<std::string>& symbols) {
        Op o{e.kind()};
        o.width = effective_width(e.width(), ow_);
        switch (e.kind()) {
        case ExprKind::Const: o.imm = e.value() & width_mask(o.width); break;
        case ExprKind::Sym:
            o.slot = static_cast<std::size_t>(std::find(symbols.begin(), symbols.end(), e.name()) - symbols.begin());
            break;
        case ExprKind::BinOp:
        case ExprKind::Cmp:
            o.op = static_cast<std::uint8_t>(e.kind() == ExprKind::BinOp ? static_cast<int>(e.binop_kind()) : static_cast<int>(e.rel()));
            o.operand_width = effective_width(e.lhs().width(), ow_);
            o.a = compile(e.lhs(), symbols);
            o.b = compile(e.rhs(), symbols);
            break;
        case ExprKind::UnOp:
            o.op = static_cast<std::uint8_t>(e.unop_kind());
            o.a = compile(e.operand(), symbols);
            break;
        case ExprKind::BoolNot:
        case ExprKind::Cast: o.a = compile(e.operand(), symbols); break;
        case ExprKind::Wildcard: throw ExprError("cannot compile a wildcard");
        }
        ops_.push_back(o);
        return ops_.size() - 1;
    }

    unsigned ow_;
    std::vector<Op> ops_;
    std::vector<std::uint64_t> regs_;
};

struct ExprPairHash {
    std::size_t operator()(const std::pair<Expr, Expr>& p) const { return hash_mix(p.first.hash(), p.second.hash()); }
};

} // namespace detail

/// Tiered oracle described at the top of this header. Thread-safe; results
/// are memoized per canonical pair.
class BuiltinOracle final : public EquivalenceOracle {
public:
    explicit BuiltinOracle(OracleConfig config = {}) : config_(config) {}

    const OracleConfig& config() const noexcept { return config_; }

    EquivResult check(const Expr& a, const Expr& b) override {
        validate(a);
        validate(b);
        if (a.width() != b.width())
            throw ExprError("equivalence of different widths: " + std::to_string(a.width()) + " vs " +
                            std::to_string(b.width()));
        Expr ca = canon(a);
        Expr cb = canon(b);
        if (ca == cb) return {true, EquivTier::Structural, std::nullopt};
        if (compare(cb, ca) < 0) std::swap(ca, cb);

        {
            std::lock_guard lock(mutex_);
            auto it = cache_.find({ca, cb});
            if (it != cache_.end()) return it->second;
        }
        EquivResult r = decide(ca, cb);
        std::lock_guard lock(mutex_);
        cache_.emplace(std::make_pair(ca, cb), r);
        return r;
    }

private:
    static void validate(const Expr& e) {
        if (!e) throw ExprError("equivalence of an empty expression");
        if (contains_wildcard(e)) throw ExprError("equivalence query on an expression holding a wildcard");
    }

    struct SymbolSet {
        std::vector<std::string> names;
        std::vector<unsigned> widths;
    };

    static SymbolSet symbols_of(const Expr& a, const Expr& b) {
        auto m = free_symbols(a);
        for (const auto& [n, w] : free_symbols(b)) m.emplace(n, w);
        SymbolSet s;
        for (const auto& [n, w] : m) {
            s.names.push_back(n);
            s.widths.push_back(w);
        }
        return s;
    }

    bool reducible(const Expr& a, const Expr& b, std::size_t symbol_count) const {
        if (symbol_count > config_.max_exhaustive_symbols) return false;
        const std::int64_t hi = static_cast<std::int64_t>(width_mask(config_.reduced_width) >> 1);
        const std::int64_t lo = -hi - 1;
        bool ok = true;
        auto check_node = [&](const Expr& n) {
            if (!ok) return;
            if (n.kind() == ExprKind::Cast) ok = false;
            if (n.is_const() && n.width() > 1 && (n.signed_value() < lo || n.signed_value() > hi)) ok = false;
            if (n.kind() == ExprKind::BinOp &&
                (n.binop_kind() == BinOpKind::Shl || n.binop_kind() == BinOpKind::Shr || n.binop_kind() == BinOpKind::Sar) &&
                n.rhs().is_const() && n.rhs().value() >= config_.reduced_width)
                ok = false;
        };
        visit(a, check_node);
        visit(b, check_node);
        return ok;
    }

    static Assignment to_assignment(const SymbolSet& s, const std::vector<std::uint64_t>& v) {
        Assignment out;
        for (std::size_t i = 0; i < s.names.size(); ++i) out[s.names[i]] = v[i] & width_mask(s.widths[i]);
        return out;
    }

    /// Native-width disagreement search over `count` deterministic samples.
    std::optional<Assignment> sample_refute(const Expr& a, const Expr& b, const SymbolSet& s, std::size_t count) const {
        detail::CompiledExpr pa(a, s.names, 0), pb(b, s.names, 0);
        std::mt19937_64 rng(config_.seed ^ detail::hash_mix(a.hash(), b.hash()));
        std::vector<std::uint64_t> v(s.names.size(), 0);
        for (std::size_t i = 0; i < count; ++i) {
            for (std::size_t k = 0; k < v.size(); ++k) v[k] = pick(rng, s.widths[k], i, k);
            if (pa.run(v.data()) != pb.run(v.data())) return to_assignment(s, v);
        }
        return std::nullopt;
    }

    static std::uint64_t pick(std::mt19937_64& rng, unsigned w, std::size_t iteration, std::size_t k) {
        const std::uint64_t m = width_mask(w);
        const std::uint64_t smax = m >> 1;
        const std::array<std::uint64_t, 10> special = {0, 1, 2, 3, m, m - 1, smax, smax + 1, smax - 1, 0x80};
        // First rounds walk through the special values so they are always covered.
        if (iteration < special.size()) return special[(iteration + k * 3) % special.size()] & m;
        switch (rng() % 4) {
        case 0: return special[rng() % special.size()] & m;
        case 1: return static_cast<std::uint64_t>(static_cast<std::int64_t>(rng() % 33) - 16) & m;
        default: return rng() & m;
        }
    }

    EquivResult decide(const Expr& a, const Expr& b) const {
        const SymbolSet s = symbols_of(a, b);
        if (auto cx = sample_refute(a, b, s, config_.quick_samples)) return {false, EquivTier::Sampled, cx};

        if (reducible(a, b, s.names.size())) {
            if (auto witness = exhaustive_witness(a, b, s)) {
                if (auto cx = lift_witness(a, b, s, *witness)) return {false, EquivTier::Exhaustive, cx};
                // The reduced-width disagreement does not exist at native width;
                // fall through to native sampling.
            } else {
                return {true, EquivTier::Exhaustive, std::nullopt};
            }
        }
        if (auto cx = sample_refute(a, b, s, config_.samples)) return {false, EquivTier::Sampled, cx};
        return {true, EquivTier::Sampled, std::nullopt};
    }

    std::optional<std::vector<std::uint64_t>> exhaustive_witness(const Expr& a, const Expr& b, const SymbolSet& s) const {
        const unsigned rw = config_.reduced_width;
        detail::CompiledExpr pa(a, s.names, rw), pb(b, s.names, rw);
        std::vector<std::uint64_t> v(s.names.size(), 0);
        std::vector<std::uint64_t> limit(s.names.size());
        for (std::size_t k = 0; k < v.size(); ++k) limit[k] = s.widths[k] == 1 ? 2 : (std::uint64_t{1} << rw);
        while (true) {
            if (pa.run(v.data()) != pb.run(v.data())) return v;
            std::size_t k = 0;
            for (; k < v.size(); ++k) {
                if (++v[k] < limit[k]) break;
                v[k] = 0;
            }
            if (k == v.size()) return std::nullopt;
        }
    }

    std::optional<Assignment> lift_witness(const Expr& a, const Expr& b, const SymbolSet& s,
                                           const std::vector<std::uint64_t>& reduced) const {
        detail::CompiledExpr pa(a, s.names, 0), pb(b, s.names, 0);
        const unsigned rw = config_.reduced_width;
        const std::size_t n = s.names.size();
        std::vector<std::uint64_t> v(n);
        for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
            for (std::size_t k = 0; k < n; ++k) {
                const bool sign_extend = (mask >> k) & 1;
                v[k] = sign_extend ? static_cast<std::uint64_t>(to_signed(reduced[k], rw)) : reduced[k];
                v[k] &= width_mask(s.widths[k]);
            }
            if (pa.run(v.data()) != pb.run(v.data())) return to_assignment(s, v);
        }
        return std::nullopt;
    }

    OracleConfig config_;
    mutable std::mutex mutex_;
    std::unordered_map<std::pair<Expr, Expr>, EquivResult, detail::ExprPairHash> cache_;
};

/// One-shot convenience over a default BuiltinOracle.
inline EquivResult check_equiv(const Expr& a, const Expr& b) {
    thread_local BuiltinOracle oracle;
    return oracle.check(a, b);
}

inline bool equiv(const Expr& a, const Expr& b) { return check_equiv(a, b).equal; }

} // namespace patchprobe
