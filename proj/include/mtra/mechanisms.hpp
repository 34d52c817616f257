#pragma once

// Local mechanisms, sequential composition, CR-net evaluation, explicit
// mechanism tables, and the table -> CR-net decomposition.

#include <functional>
#include <map>
#include <tuple>

#include "mtra/prefs.hpp"

namespace mtra {

inline std::vector<int> run_serial_dictatorship(const std::vector<int>& priority,
                                                const LocalProfile& lp) {
    int n = (int)lp.size();
    std::vector<int> assignment(n, -1);
    std::vector<bool> taken(n, false);
    for (int agent : priority) {
        for (int item : lp.at(agent)) {
            if (!taken[item]) {
                assignment[agent] = item;
                taken[item] = true;
                break;
            }
        }
        if (assignment[agent] < 0)
            throw DomainError("serial dictatorship: agent ran out of items");
    }
    return assignment;
}

struct LocalMechanism {
    enum class Kind { SerialDictatorship, Table };
    Kind kind = Kind::SerialDictatorship;
    std::vector<int> priority;                               // SD only
    std::map<LocalProfile, std::vector<int>> table;          // Table only

    static LocalMechanism sd(std::vector<int> priority) {
        LocalMechanism m;
        m.kind = Kind::SerialDictatorship;
        m.priority = std::move(priority);
        return m;
    }
    static LocalMechanism from_table(std::map<LocalProfile, std::vector<int>> table) {
        LocalMechanism m;
        m.kind = Kind::Table;
        m.table = std::move(table);
        return m;
    }

    std::vector<int> run(const LocalProfile& lp) const {
        if (kind == Kind::SerialDictatorship)
            return run_serial_dictatorship(priority, lp);
        auto it = table.find(lp);
        if (it == table.end())
            throw ConfigError("table mechanism: no entry for the given local profile");
        return it->second;
    }

    bool operator==(const LocalMechanism&) const = default;
};

enum class ProjectionMode { Conditional, Optimistic, Pessimistic };

inline const char* to_string(ProjectionMode m) {
    switch (m) {
        case ProjectionMode::Conditional: return "conditional";
        case ProjectionMode::Optimistic: return "optimistic";
        case ProjectionMode::Pessimistic: return "pessimistic";
    }
    return "?";
}

// Memoized optimistic/pessimistic projections keyed by (agent, type, assigned
// items). Valid only while the non-excluded agents' preferences are fixed.
struct ProjectionCache {
    std::map<std::tuple<int, int, std::vector<int>>, ItemOrder> entries;
};

struct SequentialMechanism {
    std::vector<int> order;                 // types, applied first to last
    std::vector<LocalMechanism> locals;     // indexed by type
};

namespace detail {

inline void require_projectable(const LexPref& pref, const std::vector<int>& order, int agent) {
    if (pref.importance == order || pref.net.separable()) return;
    throw DomainError("conditional mode requires an O-legal profile (agent " +
                      std::to_string(agent + 1) + " is neither order-aligned nor separable)");
}

inline ItemOrder projected_order(const LexPref& pref, const PartialBundle& assigned, int type,
                                 ProjectionMode mode, ProjectionCache* cache, bool cacheable,
                                 int agent) {
    if (mode == ProjectionMode::Conditional)
        return pref.net.row(type, assigned.items);
    if (cache && cacheable) {
        auto key = std::make_tuple(agent, type, assigned.items);
        auto it = cache->entries.find(key);
        if (it != cache->entries.end()) return it->second;
        ItemOrder order = project_extreme(pref, assigned, type, mode == ProjectionMode::Optimistic);
        cache->entries.emplace(std::move(key), order);
        return order;
    }
    return project_extreme(pref, assigned, type, mode == ProjectionMode::Optimistic);
}

}  // namespace detail

// Applies the local mechanisms round by round in the mechanism's type order,
// feeding each one the profile projected onto its type given the partial
// allocation so far. `rounds`, when given, receives one PartialAllocation per
// round. `cache`/`uncached_agent` support repeated evaluation with a single
// agent's report varying.
inline Allocation run_sequential(const Instance& inst, const SequentialMechanism& mech,
                                 const Profile& prof, ProjectionMode mode,
                                 std::vector<PartialAllocation>* rounds = nullptr,
                                 ProjectionCache* cache = nullptr, int uncached_agent = -1) {
    int n = inst.num_agents;
    if ((int)prof.prefs.size() != n)
        throw DomainError("profile does not cover all agents");
    if (mode == ProjectionMode::Conditional)
        for (int j = 0; j < n; ++j)
            detail::require_projectable(prof.prefs[j], mech.order, j);

    PartialAllocation acc = PartialAllocation::none(inst.num_types);
    for (int t : mech.order) {
        inst.check_type(t);
        LocalProfile lp(n);
        for (int j = 0; j < n; ++j)
            lp[j] = detail::projected_order(prof.prefs[j], acc.bundle_of(j), t, mode, cache,
                                            j != uncached_agent, j);
        PartialAllocation round = PartialAllocation::none(inst.num_types);
        round.by_type[t] = mech.locals.at(t).run(lp);
        if (rounds) rounds->push_back(round);
        acc = merge_partial(acc, round);
    }
    Allocation out = to_allocation(acc);
    out.validate(inst);
    return out;
}

struct CRNetMechanism {
    std::vector<int> order;                                         // types, applied first to last
    std::vector<std::vector<int>> parents;                          // per type, ascending; subset of more important types
    std::vector<std::map<std::vector<int>, LocalMechanism>> crt;    // per type, key = parent allocation

    // Key: concatenated per-parent assignment rows, parents ascending.
    std::vector<int> crt_key(int type, const PartialAllocation& acc) const {
        std::vector<int> key;
        for (int par : parents[type]) {
            if (!acc.covers(par))
                throw DomainError("cr-net: parent type " + std::to_string(par + 1) + " not yet allocated");
            key.insert(key.end(), acc.by_type[par].begin(), acc.by_type[par].end());
        }
        return key;
    }

    // Fills every missing parent-allocation row of every type with a copy of
    // `fallback`, making evaluation total.
    void totalize(const Instance& inst, const LocalMechanism& fallback) {
        for (int t = 0; t < (int)parents.size(); ++t) {
            for_each_allocation(inst, parents[t], [&](const PartialAllocation& a) {
                auto key = crt_key(t, a);
                crt[t].emplace(key, fallback);
            });
        }
    }
};

inline CRNetMechanism to_crnet(const Instance& inst, const SequentialMechanism& mech) {
    CRNetMechanism m;
    m.order = mech.order;
    m.parents.assign(inst.num_types, {});
    m.crt.resize(inst.num_types);
    for (int t = 0; t < inst.num_types; ++t)
        m.crt[t].emplace(std::vector<int>{}, mech.locals.at(t));
    return m;
}

inline Allocation run_crnet(const Instance& inst, const CRNetMechanism& mech, const Profile& prof,
                            std::vector<PartialAllocation>* rounds = nullptr) {
    int n = inst.num_agents;
    if ((int)prof.prefs.size() != n)
        throw DomainError("profile does not cover all agents");
    for (int j = 0; j < n; ++j)
        detail::require_projectable(prof.prefs[j], mech.order, j);

    PartialAllocation acc = PartialAllocation::none(inst.num_types);
    for (int t : mech.order) {
        inst.check_type(t);
        auto key = mech.crt_key(t, acc);
        auto it = mech.crt[t].find(key);
        if (it == mech.crt[t].end())
            throw ConfigError("cr-net: no rule for type " + std::to_string(t + 1) +
                              " under the realized parent allocation");
        LocalProfile lp(n);
        for (int j = 0; j < n; ++j)
            lp[j] = prof.prefs[j].net.row(t, acc.bundle_of(j).items);
        PartialAllocation round = PartialAllocation::none(inst.num_types);
        round.by_type[t] = it->second.run(lp);
        if (rounds) rounds->push_back(round);
        acc = merge_partial(acc, round);
    }
    Allocation out = to_allocation(acc);
    out.validate(inst);
    return out;
}

// Canonical key of a pref under a fixed order: its expansion flattened.
inline std::vector<int> pref_key(const LexPref& pref, const std::vector<int>& order) {
    auto aligned = project_to_order(pref, order);
    if (!aligned)
        throw DomainError("profile key: preference is not O-legal under the given order");
    std::vector<int> key;
    for (const auto& rows : expand_full(*aligned))
        for (const auto& row : rows)
            key.insert(key.end(), row.begin(), row.end());
    return key;
}

inline std::vector<int> profile_key(const Profile& prof, const std::vector<int>& order) {
    std::vector<int> key;
    for (const auto& pref : prof.prefs) {
        auto k = pref_key(pref, order);
        key.insert(key.end(), k.begin(), k.end());
    }
    return key;
}

// Explicit profile -> allocation map over an enumerated domain, keyed by the
// canonical serialized form of each profile.
struct MechanismTable {
    Instance inst;
    std::vector<int> order;             // the order whose domain the table covers
    std::vector<Profile> profiles;
    std::vector<Allocation> outputs;
    std::map<std::vector<int>, size_t> index;

    void reindex() {
        index.clear();
        for (size_t i = 0; i < profiles.size(); ++i)
            index.emplace(profile_key(profiles[i], order), i);
    }
};

template <class Eval>
MechanismTable build_table(const Instance& inst, const std::vector<int>& order,
                           std::vector<Profile> profiles, Eval&& eval) {
    MechanismTable table;
    table.inst = inst;
    table.order = order;
    table.outputs.reserve(profiles.size());
    for (const Profile& prof : profiles) table.outputs.push_back(eval(prof));
    table.profiles = std::move(profiles);
    table.reindex();
    return table;
}

struct DecomposeWitness {
    size_t profile_a = 0, profile_b = 0;   // indices into the table's domain
    int type = -1;                         // type whose extraction failed
    std::string reason;
};

struct DecomposeResult {
    std::optional<CRNetMechanism> crnet;
    std::optional<DecomposeWitness> witness;
    bool ok() const { return crnet.has_value(); }
};

namespace detail {

// One pref expanded under the decomposition order: rows[pos][prefix_key].
using ExpPref = std::vector<std::vector<ItemOrder>>;

struct DecomposeEntry {
    std::vector<ExpPref> prefs;              // per agent, remaining positions only
    std::vector<std::vector<int>> alloc;     // per remaining position, agent -> item
    size_t source;                           // original profile index
};

inline bool decompose_rec(int n, int depth, const std::vector<int>& order,
                          const std::vector<DecomposeEntry>& entries,
                          const Instance& inst, CRNetMechanism& out,
                          const PartialAllocation& path, DecomposeWitness& witness) {
    if (entries.empty() || entries[0].alloc.empty()) return true;
    int type = order[depth];

    // Step 1: the allocation of this type may depend only on the profile
    // restricted to it.
    std::map<LocalProfile, std::pair<std::vector<int>, size_t>> local_table;
    for (const auto& e : entries) {
        LocalProfile lp;
        lp.reserve(e.prefs.size());
        for (const auto& ep : e.prefs) lp.push_back(ep[0][0]);
        auto [it, inserted] = local_table.emplace(std::move(lp), std::make_pair(e.alloc[0], e.source));
        if (!inserted && it->second.first != e.alloc[0]) {
            witness = {it->second.second, e.source, type,
                       "allocation of type " + std::to_string(type + 1) +
                           " differs between two profiles with identical local preferences for it"};
            return false;
        }
    }
    {
        std::map<LocalProfile, std::vector<int>> lt;
        for (auto& [lp, v] : local_table) lt.emplace(lp, v.first);
        out.crt[type].emplace(out.crt_key(type, path), LocalMechanism::from_table(std::move(lt)));
    }

    // Step 3: group by the realized allocation; within a group, the residual
    // outcome may depend only on the projected residual profile.
    std::map<std::vector<int>, std::vector<DecomposeEntry>> groups;
    for (const auto& e : entries) {
        DecomposeEntry rest;
        rest.source = e.source;
        rest.alloc.assign(e.alloc.begin() + 1, e.alloc.end());
        rest.prefs.reserve(e.prefs.size());
        for (size_t j = 0; j < e.prefs.size(); ++j) {
            const ExpPref& ep = e.prefs[j];
            int own = e.alloc[0][j];
            ExpPref proj(ep.size() - 1);
            for (size_t pos = 1; pos < ep.size(); ++pos) {
                size_t keys = ep[pos].size() / n;
                proj[pos - 1].resize(keys);
                for (size_t key = 0; key < keys; ++key)
                    proj[pos - 1][key] = ep[pos][own + key * n];
            }
            rest.prefs.push_back(std::move(proj));
        }
        groups[e.alloc[0]].push_back(std::move(rest));
    }

    for (auto& [alloc, group] : groups) {
        // Deduplicate by projected profile; conflicting residuals are a
        // witness against decomposability.
        std::map<std::vector<ExpPref>, size_t> seen;
        std::vector<DecomposeEntry> dedup;
        for (auto& e : group) {
            auto it = seen.find(e.prefs);
            if (it == seen.end()) {
                seen.emplace(e.prefs, dedup.size());
                dedup.push_back(std::move(e));
            } else if (dedup[it->second].alloc != e.alloc) {
                witness = {dedup[it->second].source, e.source, type,
                           "residual allocation after type " + std::to_string(type + 1) +
                               " differs between two profiles with identical projected preferences"};
                return false;
            }
        }
        PartialAllocation next_path = path;
        next_path.by_type[type] = alloc;
        if (!decompose_rec(n, depth + 1, order, dedup, inst, out, next_path, witness))
            return false;
    }
    return true;
}

}  // namespace detail

// Constructive decomposition of a mechanism table into an O-legal CR-net with
// full conditioning on more important types. On failure, returns a two-profile
// witness showing why no decomposition in this order exists.
inline DecomposeResult decompose(const MechanismTable& table, const std::vector<int>& order) {
    const Instance& inst = table.inst;
    int n = inst.num_agents, p = inst.num_types;

    CRNetMechanism out;
    out.order = order;
    out.parents.resize(p);
    out.crt.resize(p);
    for (int pos = 0; pos < p; ++pos)
        for (int h = 0; h < pos; ++h) out.parents[order[pos]].push_back(order[h]);
    for (auto& pa : out.parents) std::sort(pa.begin(), pa.end());

    std::vector<detail::DecomposeEntry> entries;
    entries.reserve(table.profiles.size());
    for (size_t i = 0; i < table.profiles.size(); ++i) {
        detail::DecomposeEntry e;
        e.source = i;
        for (const auto& pref : table.profiles[i].prefs) {
            auto aligned = project_to_order(pref, order);
            if (!aligned)
                throw DomainError("decompose: profile " + std::to_string(i) +
                                  " is not O-legal under the requested order");
            e.prefs.push_back(expand_full(*aligned));
        }
        e.alloc.reserve(p);
        for (int t : order) e.alloc.push_back(table.outputs[i].by_type[t]);
        entries.push_back(std::move(e));
    }

    DecomposeWitness witness;
    PartialAllocation path = PartialAllocation::none(p);
    if (!detail::decompose_rec(n, 0, order, entries, inst, out, path, witness))
        return {std::nullopt, witness};
    return {out, std::nullopt};
}

// Convenience wrapper over all p! importance orders.
inline std::vector<std::pair<std::vector<int>, DecomposeResult>>
decompose_all_orders(const MechanismTable& table) {
    std::vector<int> order(table.inst.num_types);
    std::iota(order.begin(), order.end(), 0);
    std::vector<std::pair<std::vector<int>, DecomposeResult>> out;
    do {
        try {
            out.emplace_back(order, decompose(table, order));
        } catch (const DomainError& e) {
            DecomposeResult r;
            r.witness = DecomposeWitness{0, 0, -1, e.what()};
            out.emplace_back(order, std::move(r));
        }
    } while (std::next_permutation(order.begin(), order.end()));
    return out;
}

// Evaluates a table row; profiles are matched by induced order.
inline Allocation run_table(const MechanismTable& table, const Profile& prof) {
    auto it = table.index.find(profile_key(prof, table.order));
    if (it == table.index.end())
        throw ConfigError("mechanism table: profile not in the table's domain");
    return table.outputs[it->second];
}

}  // namespace mtra
