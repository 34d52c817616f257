#pragma once

// CP-nets, lexicographic extensions, projections, and preference enumeration.

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>

#include "mtra/core.hpp"

namespace mtra {

// A CPT row is a strict order over the n items of one type, best first.
using ItemOrder = std::vector<int>;

// CPT rows are stored for the full cartesian product of parent item sets,
// keyed by a mixed-radix integer (parents ascending by type index, first
// parent least significant).
struct CPNet {
    int num_types = 0;
    int num_items = 0;
    std::vector<std::vector<int>> parents;                // per type, sorted ascending
    std::vector<std::vector<ItemOrder>> cpt;              // [type][row_key] -> order

    int row_key(int type, const std::vector<int>& bundle_items) const {
        int key = 0, stride = 1;
        for (int par : parents[type]) {
            int item = bundle_items.at(par);
            if (item < 0)
                throw DomainError("cpt lookup: parent type " + std::to_string(par + 1) + " unassigned");
            key += item * stride;
            stride *= num_items;
        }
        return key;
    }

    const ItemOrder& row(int type, const std::vector<int>& bundle_items) const {
        return cpt[type].at(row_key(type, bundle_items));
    }

    bool separable() const {
        for (const auto& p : parents)
            if (!p.empty()) return false;
        return true;
    }
};

struct LexPref {
    std::vector<int> importance;   // types, most important first
    CPNet net;

    int importance_rank(int type) const {
        for (int pos = 0; pos < (int)importance.size(); ++pos)
            if (importance[pos] == type) return pos;
        throw DomainError("type " + std::to_string(type + 1) + " missing from importance order");
    }
};

struct Profile {
    std::vector<LexPref> prefs;
    std::optional<std::vector<int>> shared_order;
};

// Per-agent strict order over the items of a single type.
using LocalProfile = std::vector<ItemOrder>;

namespace detail {
inline bool is_item_permutation(const ItemOrder& row, int n) {
    if ((int)row.size() != n) return false;
    std::vector<bool> seen(n, false);
    for (int item : row) {
        if (item < 0 || item >= n || seen[item]) return false;
        seen[item] = true;
    }
    return true;
}

inline int pow_int(int base, int exp) {
    int r = 1;
    while (exp-- > 0) r *= base;
    return r;
}
}  // namespace detail

struct OLegalityResult {
    bool ok = false;
    std::string diagnostic;
    explicit operator bool() const { return ok; }
};

// Structural validation plus the O-legality condition: every dependency edge
// must point from a more important type to a less important one.
inline OLegalityResult validate_o_legal(const LexPref& pref) {
    const CPNet& net = pref.net;
    int p = net.num_types, n = net.num_items;
    if ((int)pref.importance.size() != p)
        return {false, "importance order does not cover all types"};
    {
        std::vector<bool> seen(p, false);
        for (int t : pref.importance) {
            if (t < 0 || t >= p || seen[t]) return {false, "importance order is not a permutation of the types"};
            seen[t] = true;
        }
    }
    if ((int)net.parents.size() != p || (int)net.cpt.size() != p)
        return {false, "cp-net tables do not cover all types"};
    for (int t = 0; t < p; ++t) {
        int expect_rows = detail::pow_int(n, (int)net.parents[t].size());
        if ((int)net.cpt[t].size() != expect_rows)
            return {false, "type " + std::to_string(t + 1) + ": expected " + std::to_string(expect_rows) +
                           " cpt rows, found " + std::to_string(net.cpt[t].size())};
        for (int key = 0; key < expect_rows; ++key)
            if (!detail::is_item_permutation(net.cpt[t][key], n))
                return {false, "type " + std::to_string(t + 1) + ": cpt row " + std::to_string(key) +
                               " is not a strict order over all items"};
        for (int par : net.parents[t]) {
            if (par < 0 || par >= p || par == t)
                return {false, "type " + std::to_string(t + 1) + ": bad parent"};
            if (pref.importance_rank(par) >= pref.importance_rank(t))
                return {false, "edge from type " + std::to_string(par + 1) + " to type " +
                               std::to_string(t + 1) + " violates the importance order"};
        }
    }
    return {true, ""};
}

// Strict lexicographic comparison. Returns +1 if x is preferred to y, -1 for
// the reverse, 0 iff x == y. Scans types in importance order; the first
// differing type decides via its CPT row (parent values lie in the shared
// prefix when the pref is O-legal).
inline int lex_compare(const LexPref& pref, const Bundle& x, const Bundle& y) {
    for (int t : pref.importance) {
        if (x[t] == y[t]) continue;
        const ItemOrder& row = pref.net.row(t, x);
        for (int item : row) {
            if (item == x[t]) return 1;
            if (item == y[t]) return -1;
        }
        throw DomainError("cpt row for type " + std::to_string(t + 1) + " missing compared items");
    }
    return 0;
}

template <class F>
void for_each_bundle(int n, int p, F&& f) {
    Bundle b(p, 0);
    while (true) {
        f(static_cast<const Bundle&>(b));
        int t = p - 1;
        for (; t >= 0; --t) {
            if (++b[t] < n) break;
            b[t] = 0;
        }
        if (t < 0) break;
    }
}

// All n^p bundles, strictly descending under lex_compare.
inline std::vector<Bundle> rank_bundles(const LexPref& pref, uint64_t budget = 1u << 20) {
    int n = pref.net.num_items, p = pref.net.num_types;
    uint64_t count = 1;
    for (int t = 0; t < p; ++t) {
        count *= (uint64_t)n;
        if (count > budget)
            throw EnumerationError("bundle ranking over budget " + std::to_string(budget));
    }
    std::vector<Bundle> bundles;
    bundles.reserve(count);
    for_each_bundle(n, p, [&](const Bundle& b) { bundles.push_back(b); });
    std::sort(bundles.begin(), bundles.end(),
              [&](const Bundle& a, const Bundle& b) { return lex_compare(pref, a, b) > 0; });
    return bundles;
}

// Conditional projection: the CPT row of `type` keyed by the prefix of
// strictly more important types. The prefix must cover all of them.
inline ItemOrder project_conditional(const LexPref& pref, int type, const PartialBundle& prefix) {
    int rank = pref.importance_rank(type);
    for (int pos = 0; pos < rank; ++pos)
        if (!prefix.covers(pref.importance[pos]))
            throw DomainError("conditional projection: prefix missing type " +
                              std::to_string(pref.importance[pos] + 1));
    return pref.net.row(type, prefix.items);
}

namespace detail {

// Best (or worst) bundle agreeing with `assigned` on its covered types and
// holding `item` at `type`, by explicit enumeration of all completions.
inline Bundle extreme_completion(const LexPref& pref, const PartialBundle& assigned,
                                 int type, int item, bool maximize) {
    int n = pref.net.num_items, p = pref.net.num_types;
    std::vector<int> free_types;
    Bundle base(p, -1);
    for (int t = 0; t < p; ++t) {
        if (t == type) base[t] = item;
        else if (assigned.covers(t)) base[t] = assigned.items[t];
        else free_types.push_back(t);
    }
    Bundle best;
    std::vector<int> odo(free_types.size(), 0);
    while (true) {
        Bundle cand = base;
        for (size_t i = 0; i < free_types.size(); ++i) cand[free_types[i]] = odo[i];
        if (best.empty() || (maximize ? lex_compare(pref, cand, best) > 0
                                      : lex_compare(pref, cand, best) < 0))
            best = cand;
        int i = (int)odo.size() - 1;
        for (; i >= 0; --i) {
            if (++odo[i] < n) break;
            odo[i] = 0;
        }
        if (i < 0) break;
    }
    return best;
}

inline ItemOrder project_extreme(const LexPref& pref, const PartialBundle& assigned,
                                 int type, bool maximize) {
    if (assigned.covers(type))
        throw DomainError("projection target type is already assigned");
    int n = pref.net.num_items;
    if (pref.net.separable())
        return pref.net.cpt[type][0];
    std::vector<Bundle> extremes(n);
    for (int a = 0; a < n; ++a)
        extremes[a] = extreme_completion(pref, assigned, type, a, maximize);
    ItemOrder order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return lex_compare(pref, extremes[a], extremes[b]) > 0; });
    return order;
}

}  // namespace detail

// Optimistic projection: order items of `type` by the lex-best completion of
// the already-assigned partial bundle.
inline ItemOrder project_optimistic(const LexPref& pref, const PartialBundle& assigned, int type) {
    return detail::project_extreme(pref, assigned, type, true);
}

// Pessimistic projection: same with the lex-worst completion.
inline ItemOrder project_pessimistic(const LexPref& pref, const PartialBundle& assigned, int type) {
    return detail::project_extreme(pref, assigned, type, false);
}

// Expanded form: rows[pos][prefix_key] is the conditional order of the type at
// importance position pos, keyed over all assignments to the more important
// types (position 0 least significant). Two prefs with equal importance induce
// the same bundle order iff their expansions are equal.
inline std::vector<std::vector<ItemOrder>> expand_full(const LexPref& pref) {
    int n = pref.net.num_items, p = pref.net.num_types;
    std::vector<std::vector<ItemOrder>> rows(p);
    for (int pos = 0; pos < p; ++pos) {
        int type = pref.importance[pos];
        int keys = detail::pow_int(n, pos);
        rows[pos].resize(keys);
        for (int key = 0; key < keys; ++key) {
            Bundle b(p, -1);
            int k = key;
            for (int h = 0; h < pos; ++h) {
                b[pref.importance[h]] = k % n;
                k /= n;
            }
            rows[pos][key] = pref.net.row(type, b);
        }
    }
    return rows;
}

inline bool same_induced_order(const LexPref& a, const LexPref& b) {
    if (a.importance != b.importance) return false;
    return expand_full(a) == expand_full(b);
}

inline uint64_t pref_count(const Instance& inst, const std::vector<std::vector<int>>& parents) {
    uint64_t c = 1;
    uint64_t f = factorial(inst.num_agents);
    for (const auto& pa : parents) {
        int rows = detail::pow_int(inst.num_agents, (int)pa.size());
        for (int r = 0; r < rows; ++r) c *= f;
    }
    return c;
}

// Every O-legal pref with exactly the given dependency structure, in canonical
// order: types by importance, rows by key, rows filled in lexicographic
// permutation order with the last visited row varying fastest.
inline std::vector<LexPref> enumerate_prefs(const Instance& inst, const std::vector<int>& order,
                                            const std::vector<std::vector<int>>& parents,
                                            uint64_t budget) {
    int n = inst.num_agents, p = inst.num_types;
    uint64_t count = pref_count(inst, parents);
    if (count > budget)
        throw EnumerationError("preference enumeration would yield " + std::to_string(count) +
                               " entries, over budget " + std::to_string(budget));

    std::vector<ItemOrder> perms;
    {
        ItemOrder perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        do perms.push_back(perm);
        while (std::next_permutation(perm.begin(), perm.end()));
    }

    // One choice slot per CPT row, in (importance position, row key) order.
    std::vector<std::pair<int, int>> slots;   // (type, key)
    for (int t : order)
        for (int key = 0; key < detail::pow_int(n, (int)parents[t].size()); ++key)
            slots.emplace_back(t, key);

    LexPref proto;
    proto.importance = order;
    proto.net.num_types = p;
    proto.net.num_items = n;
    proto.net.parents = parents;
    proto.net.cpt.resize(p);
    for (int t = 0; t < p; ++t)
        proto.net.cpt[t].resize(detail::pow_int(n, (int)parents[t].size()));

    std::vector<LexPref> out;
    out.reserve(count);
    std::vector<size_t> odo(slots.size(), 0);
    while (true) {
        for (size_t i = 0; i < slots.size(); ++i)
            proto.net.cpt[slots[i].first][slots[i].second] = perms[odo[i]];
        auto check = validate_o_legal(proto);
        if (!check.ok)
            throw DomainError("enumerate_prefs: dependency structure is not O-legal: " + check.diagnostic);
        out.push_back(proto);
        int i = (int)odo.size() - 1;
        for (; i >= 0; --i) {
            if (++odo[i] < perms.size()) break;
            odo[i] = 0;
        }
        if (i < 0) break;
    }
    return out;
}

// Dependency structure with every type conditioned on all more important
// types; enumerating it under a shared order covers all of L_O exactly once.
inline std::vector<std::vector<int>> full_parents_for(int p, const std::vector<int>& order) {
    std::vector<std::vector<int>> parents(p);
    for (int pos = 0; pos < (int)order.size(); ++pos) {
        for (int h = 0; h < pos; ++h) parents[order[pos]].push_back(order[h]);
        std::sort(parents[order[pos]].begin(), parents[order[pos]].end());
    }
    return parents;
}

inline std::vector<std::vector<int>> full_parents(const Instance& inst, const std::vector<int>& order) {
    return full_parents_for(inst.num_types, order);
}

inline std::vector<std::vector<int>> no_parents(const Instance& inst) {
    return std::vector<std::vector<int>>(inst.num_types);
}

// Canonical rank-raising misreport: for each type, move target's item to the
// top of the CPT row keyed by target's parent assignment. The induced order
// ranks `target` weakly higher and keeps every pair it previously beat.
inline LexPref perturb_raise(const LexPref& pref, const Bundle& target) {
    LexPref out = pref;
    for (int t : pref.importance) {
        int key = out.net.row_key(t, target);
        ItemOrder& row = out.net.cpt[t][key];
        auto it = std::find(row.begin(), row.end(), target[t]);
        std::rotate(row.begin(), it, it + 1);
    }
    return out;
}

inline std::vector<std::vector<int>> full_parents_for(int p, const std::vector<int>& order);

// Re-expresses a pref as an order-importance CP-net with full parents, if its
// induced order lies in the O-lexicographic domain: project a candidate
// (using a fixed completion for each conditional comparison) and test whether
// it reproduces the original ranking. Desk-scale only.
inline std::optional<LexPref> project_to_order(const LexPref& pref, const std::vector<int>& order,
                                               uint64_t budget = 1u << 16) {
    int n = pref.net.num_items, p = pref.net.num_types;
    LexPref cand;
    cand.importance = order;
    cand.net.num_types = p;
    cand.net.num_items = n;
    cand.net.parents = full_parents_for(p, order);
    cand.net.cpt.resize(p);
    for (int pos = 0; pos < p; ++pos) {
        int type = order[pos];
        int keys = detail::pow_int(n, pos);
        cand.net.cpt[type].resize(keys);
        for (int key = 0; key < keys; ++key) {
            Bundle base(p, 0);   // fixed completion for less important types
            int k = key;
            for (int h = 0; h < pos; ++h) {
                base[order[h]] = k % n;
                k /= n;
            }
            ItemOrder row(n);
            std::iota(row.begin(), row.end(), 0);
            std::sort(row.begin(), row.end(), [&](int a, int b) {
                Bundle x = base, y = base;
                x[type] = a;
                y[type] = b;
                return lex_compare(pref, x, y) > 0;
            });
            cand.net.cpt[type][key] = row;
        }
    }
    if (rank_bundles(cand, budget) != rank_bundles(pref, budget)) return std::nullopt;
    return cand;
}

inline bool in_lex_domain(const LexPref& pref, const std::vector<int>& order, uint64_t budget = 1u << 16) {
    if (pref.importance == order) return (bool)validate_o_legal(pref).ok;
    return project_to_order(pref, order, budget).has_value();
}

inline bool is_o_legal_profile(const Profile& prof, const std::vector<int>& order) {
    for (const auto& pref : prof.prefs)
        if (!in_lex_domain(pref, order)) return false;
    return true;
}

}  // namespace mtra
