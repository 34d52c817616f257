#pragma once

// Domain model for multi-type resource allocation: instances, bundles,
// allocations, and brute-force allocation enumeration.

#include <algorithm>
#include <compare>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace mtra {

struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EnumerationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Agents and types are dense 0-based indices internally; the display name of
// item k of type i defaults to "k_i" with 1-based k and i.
struct Instance {
    int num_agents = 0;
    int num_types = 0;
    std::vector<std::string> agent_names;               // size n
    std::vector<std::vector<std::string>> item_names;   // [type][item], n per type

    static Instance make(int n, int p) {
        Instance inst;
        inst.num_agents = n;
        inst.num_types = p;
        inst.agent_names.reserve(n);
        for (int j = 0; j < n; ++j)
            inst.agent_names.push_back(std::to_string(j + 1));
        inst.item_names.resize(p);
        for (int t = 0; t < p; ++t) {
            inst.item_names[t].reserve(n);
            for (int k = 0; k < n; ++k)
                inst.item_names[t].push_back(std::to_string(k + 1) + "_" + std::to_string(t + 1));
        }
        inst.validate();
        return inst;
    }

    void validate() const {
        if (num_agents < 1)
            throw DomainError("instance: need at least one agent");
        if (num_types < 1)
            throw DomainError("instance: need at least one type");
        if ((int)agent_names.size() != num_agents)
            throw DomainError("instance: agent name count does not match agent count");
        if ((int)item_names.size() != num_types)
            throw DomainError("instance: item name lists do not match type count");
        for (int t = 0; t < num_types; ++t) {
            if ((int)item_names[t].size() != num_agents)
                throw DomainError("instance: type " + std::to_string(t + 1) +
                                  " must have exactly " + std::to_string(num_agents) + " items");
            auto names = item_names[t];
            std::sort(names.begin(), names.end());
            if (std::adjacent_find(names.begin(), names.end()) != names.end())
                throw DomainError("instance: duplicate item name in type " + std::to_string(t + 1));
        }
    }

    const std::string& agent(int j) const { return agent_names.at(j); }
    const std::string& item(int t, int k) const { return item_names.at(t).at(k); }

    int agent_index(const std::string& name) const {
        for (int j = 0; j < num_agents; ++j)
            if (agent_names[j] == name) return j;
        return -1;
    }
    int item_index(int t, const std::string& name) const {
        for (int k = 0; k < num_agents; ++k)
            if (item_names[t][k] == name) return k;
        return -1;
    }

    void check_type(int t) const {
        if (t < 0 || t >= num_types)
            throw DomainError("unknown type index " + std::to_string(t + 1));
    }
};

// A full bundle: one item index per type.
using Bundle = std::vector<int>;

// A bundle restricted to a subset of types; -1 marks an uncovered type.
struct PartialBundle {
    std::vector<int> items;

    static PartialBundle none(int p) { return PartialBundle{std::vector<int>(p, -1)}; }
    static PartialBundle of(const Bundle& b) { return PartialBundle{b}; }

    bool covers(int t) const { return items.at(t) >= 0; }
    std::vector<int> type_set() const {
        std::vector<int> s;
        for (int t = 0; t < (int)items.size(); ++t)
            if (items[t] >= 0) s.push_back(t);
        return s;
    }
    bool operator==(const PartialBundle&) const = default;
    auto operator<=>(const PartialBundle&) const = default;
};

// Allocations are stored as per-type assignment vectors (agent -> item), which
// makes the bijection invariant a cheap permutation check. The defaulted
// comparison is the canonical (type, agent, item) lexicographic order.
struct Allocation {
    std::vector<std::vector<int>> by_type;   // [type][agent] -> item

    Bundle bundle_of(int agent) const {
        Bundle b(by_type.size());
        for (size_t t = 0; t < by_type.size(); ++t)
            b[t] = by_type[t].at(agent);
        return b;
    }

    void validate(const Instance& inst) const {
        if ((int)by_type.size() != inst.num_types)
            throw DomainError("allocation: wrong number of types");
        for (int t = 0; t < inst.num_types; ++t) {
            if ((int)by_type[t].size() != inst.num_agents)
                throw DomainError("allocation: wrong number of agents in type " + std::to_string(t + 1));
            std::vector<bool> seen(inst.num_agents, false);
            for (int item : by_type[t]) {
                if (item < 0 || item >= inst.num_agents || seen[item])
                    throw DomainError("allocation: type " + std::to_string(t + 1) +
                                      " assignment is not a bijection");
                seen[item] = true;
            }
        }
    }

    bool operator==(const Allocation&) const = default;
    auto operator<=>(const Allocation&) const = default;
};

struct PartialAllocation {
    std::vector<std::vector<int>> by_type;   // empty vector = type not covered

    static PartialAllocation none(int p) { return PartialAllocation{std::vector<std::vector<int>>(p)}; }

    bool covers(int t) const { return !by_type.at(t).empty(); }
    std::vector<int> type_set() const {
        std::vector<int> s;
        for (int t = 0; t < (int)by_type.size(); ++t)
            if (!by_type[t].empty()) s.push_back(t);
        return s;
    }
    PartialBundle bundle_of(int agent) const {
        PartialBundle b = PartialBundle::none((int)by_type.size());
        for (int t = 0; t < (int)by_type.size(); ++t)
            if (!by_type[t].empty()) b.items[t] = by_type[t].at(agent);
        return b;
    }

    bool operator==(const PartialAllocation&) const = default;
    auto operator<=>(const PartialAllocation&) const = default;
};

inline PartialAllocation to_partial(const Allocation& a) {
    return PartialAllocation{a.by_type};
}

inline Allocation to_allocation(const PartialAllocation& a) {
    for (const auto& row : a.by_type)
        if (row.empty())
            throw DomainError("partial allocation does not cover all types");
    return Allocation{a.by_type};
}

inline PartialAllocation restrict_allocation(const Allocation& a, const std::vector<int>& types) {
    PartialAllocation out = PartialAllocation::none((int)a.by_type.size());
    for (int t : types) {
        if (t < 0 || t >= (int)a.by_type.size())
            throw DomainError("restrict: unknown type index " + std::to_string(t + 1));
        out.by_type[t] = a.by_type[t];
    }
    return out;
}

inline PartialAllocation restrict_partial(const PartialAllocation& a, const std::vector<int>& types) {
    PartialAllocation out = PartialAllocation::none((int)a.by_type.size());
    for (int t : types) {
        if (t < 0 || t >= (int)a.by_type.size())
            throw DomainError("restrict: unknown type index " + std::to_string(t + 1));
        if (a.by_type[t].empty())
            throw DomainError("restrict: type " + std::to_string(t + 1) + " not covered");
        out.by_type[t] = a.by_type[t];
    }
    return out;
}

inline PartialAllocation merge_partial(const PartialAllocation& a, const PartialAllocation& b) {
    if (a.by_type.size() != b.by_type.size())
        throw DomainError("merge: mismatched type counts");
    PartialAllocation out = a;
    for (int t = 0; t < (int)b.by_type.size(); ++t) {
        if (b.by_type[t].empty()) continue;
        if (!a.by_type[t].empty())
            throw DomainError("merge: overlapping type " + std::to_string(t + 1));
        out.by_type[t] = b.by_type[t];
    }
    return out;
}

inline uint64_t factorial(int n) {
    uint64_t r = 1;
    for (int k = 2; k <= n; ++k) r *= (uint64_t)k;
    return r;
}

// (n!)^|types|
inline uint64_t allocation_count(const Instance& inst, const std::vector<int>& types) {
    uint64_t c = 1;
    uint64_t f = factorial(inst.num_agents);
    for (size_t i = 0; i < types.size(); ++i) c *= f;
    return c;
}

// Visits every per-type bijection combination over `types`, in canonical
// order (per-type permutations in lexicographic order, last type fastest).
template <class F>
void for_each_allocation(const Instance& inst, const std::vector<int>& types, F&& f) {
    for (int t : types) inst.check_type(t);
    std::vector<std::vector<int>> perms(types.size());
    for (auto& perm : perms) {
        perm.resize(inst.num_agents);
        std::iota(perm.begin(), perm.end(), 0);
    }
    while (true) {
        PartialAllocation a = PartialAllocation::none(inst.num_types);
        for (size_t i = 0; i < types.size(); ++i)
            a.by_type[types[i]] = perms[i];
        f(static_cast<const PartialAllocation&>(a));
        int i = (int)types.size() - 1;
        for (; i >= 0; --i) {
            if (std::next_permutation(perms[i].begin(), perms[i].end())) break;
            // perms[i] wrapped to identity; carry into the next position
        }
        if (i < 0) break;
    }
}

inline std::vector<PartialAllocation> enumerate_allocations(const Instance& inst,
                                                            const std::vector<int>& types,
                                                            uint64_t budget) {
    uint64_t count = allocation_count(inst, types);
    if (count > budget)
        throw EnumerationError("allocation enumeration would yield " + std::to_string(count) +
                               " entries, over budget " + std::to_string(budget));
    std::vector<PartialAllocation> out;
    out.reserve(count);
    for_each_allocation(inst, types, [&](const PartialAllocation& a) { out.push_back(a); });
    return out;
}

inline std::vector<int> all_types(const Instance& inst) {
    std::vector<int> ts(inst.num_types);
    std::iota(ts.begin(), ts.end(), 0);
    return ts;
}

}  // namespace mtra
