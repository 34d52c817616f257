#pragma once

// Brute-force and sampled verifiers for the axiomatic properties, plus the
// local <-> sequential transfer suites.

#include <atomic>
#include <mutex>
#include <random>
#include <thread>

#include "mtra/mechanisms.hpp"

namespace mtra {

enum class Property {
    Anonymity,
    TypewiseNeutrality,
    NonBossiness,
    NonBossinessImportant,
    Monotonicity,
    ParetoOptimality,
    Strategyproofness,
};

inline const char* to_string(Property p) {
    switch (p) {
        case Property::Anonymity: return "anonymity";
        case Property::TypewiseNeutrality: return "typewise-neutrality";
        case Property::NonBossiness: return "non-bossiness";
        case Property::NonBossinessImportant: return "non-bossiness-important";
        case Property::Monotonicity: return "monotonicity";
        case Property::ParetoOptimality: return "pareto-optimality";
        case Property::Strategyproofness: return "strategyproofness";
    }
    return "?";
}

struct Witness {
    Profile profile;
    int agent = -1;
    std::optional<LexPref> misreport;
    std::optional<std::vector<int>> agent_perm;                    // anonymity
    std::optional<std::vector<std::vector<int>>> item_perms;       // typewise neutrality
    std::optional<Allocation> dominating;                          // pareto
    Allocation before, after;
    std::string note;
};

struct PropertyReport {
    Property property{};
    enum class Verdict { HoldsExhaustive, HoldsSampled, Violated } verdict{};
    uint64_t checked = 0;          // profiles examined
    uint64_t seed = 0;
    std::optional<Witness> witness;

    bool holds() const { return verdict != Verdict::Violated; }
};

inline const char* to_string(PropertyReport::Verdict v) {
    switch (v) {
        case PropertyReport::Verdict::HoldsExhaustive: return "holds-exhaustive";
        case PropertyReport::Verdict::HoldsSampled: return "holds-sampled";
        case PropertyReport::Verdict::Violated: return "violated";
    }
    return "?";
}

struct Mechanism {
    std::string name;
    std::function<Allocation(const Profile&)> eval;
};

inline Mechanism make_mechanism(const Instance& inst, const SequentialMechanism& mech,
                                ProjectionMode mode = ProjectionMode::Conditional,
                                std::string name = "sequential") {
    return {std::move(name),
            [&inst, mech, mode](const Profile& p) { return run_sequential(inst, mech, p, mode); }};
}

inline Mechanism make_mechanism(const Instance& inst, const CRNetMechanism& mech,
                                std::string name = "crnet") {
    return {std::move(name), [&inst, mech](const Profile& p) { return run_crnet(inst, mech, p); }};
}

inline Mechanism make_mechanism(const MechanismTable& table, std::string name = "table") {
    return {std::move(name), [table](const Profile& p) { return run_table(table, p); }};
}

// Wraps a single-type local mechanism as a p=1 mechanism.
inline Mechanism make_local_mechanism(const LocalMechanism& local, std::string name = "local") {
    return {std::move(name), [local](const Profile& prof) {
                LocalProfile lp;
                lp.reserve(prof.prefs.size());
                for (const auto& pref : prof.prefs) lp.push_back(pref.net.cpt[0][0]);
                return Allocation{{local.run(lp)}};
            }};
}

// Profile space plus enumeration-or-sampling policy. Per-agent preference
// lists double as the misreport classes for the manipulation-style checks.
struct ProfileDomain {
    Instance inst;
    std::vector<int> order;
    std::vector<std::vector<LexPref>> agent_prefs;   // allowed prefs per agent
    enum class Policy { Exhaustive, Sampled } policy = Policy::Exhaustive;
    uint64_t samples = 0;
    uint64_t seed = 0;

    uint64_t profile_count() const {
        uint64_t c = 1;
        for (const auto& list : agent_prefs) {
            if (list.empty()) throw DomainError("profile domain: empty preference list");
            c *= (uint64_t)list.size();
        }
        return c;
    }

    Profile profile_at(uint64_t idx) const {
        Profile prof;
        prof.prefs.resize(agent_prefs.size());
        for (int j = (int)agent_prefs.size() - 1; j >= 0; --j) {
            prof.prefs[j] = agent_prefs[j][idx % agent_prefs[j].size()];
            idx /= agent_prefs[j].size();
        }
        prof.shared_order = order;
        return prof;
    }

    // Indices actually visited; reproducible from (seed, samples).
    std::vector<uint64_t> visit_indices() const {
        uint64_t total = profile_count();
        if (policy == Policy::Exhaustive) {
            std::vector<uint64_t> all(total);
            std::iota(all.begin(), all.end(), 0);
            return all;
        }
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<uint64_t> dist(0, total - 1);
        std::vector<uint64_t> out(samples);
        for (auto& v : out) v = dist(rng);
        return out;
    }
};

inline ProfileDomain make_full_domain(const Instance& inst, const std::vector<int>& order,
                                      uint64_t budget = 1u << 22) {
    ProfileDomain dom;
    dom.inst = inst;
    dom.order = order;
    auto prefs = enumerate_prefs(inst, order, full_parents(inst, order), budget);
    dom.agent_prefs.assign(inst.num_agents, prefs);
    return dom;
}

inline ProfileDomain make_separable_domain(const Instance& inst, const std::vector<int>& order,
                                           bool both_importance_orders = false,
                                           uint64_t budget = 1u << 22) {
    ProfileDomain dom;
    dom.inst = inst;
    dom.order = order;
    std::vector<LexPref> prefs;
    if (both_importance_orders) {
        std::vector<int> o(inst.num_types);
        std::iota(o.begin(), o.end(), 0);
        do {
            auto part = enumerate_prefs(inst, o, no_parents(inst), budget);
            prefs.insert(prefs.end(), part.begin(), part.end());
        } while (std::next_permutation(o.begin(), o.end()));
    } else {
        prefs = enumerate_prefs(inst, order, no_parents(inst), budget);
    }
    dom.agent_prefs.assign(inst.num_agents, prefs);
    return dom;
}

namespace detail {

// Deterministic parallel first-witness scan: fn(i) -> optional<Witness>; the
// smallest violating index wins regardless of thread count.
template <class F>
std::optional<std::pair<uint64_t, Witness>> scan_first(uint64_t count, int jobs, F&& fn) {
    if (jobs <= 1) {
        for (uint64_t i = 0; i < count; ++i)
            if (auto w = fn(i)) return std::make_pair(i, *w);
        return std::nullopt;
    }
    std::atomic<uint64_t> best{UINT64_MAX};
    std::mutex mu;
    std::optional<Witness> best_witness;
    auto worker = [&](int tid) {
        for (uint64_t i = tid; i < count; i += (uint64_t)jobs) {
            if (i > best.load(std::memory_order_relaxed)) continue;
            if (auto w = fn(i)) {
                std::lock_guard<std::mutex> lock(mu);
                if (i < best.load()) {
                    best.store(i);
                    best_witness = *w;
                }
            }
        }
    };
    std::vector<std::thread> threads;
    for (int tid = 0; tid < jobs; ++tid) threads.emplace_back(worker, tid);
    for (auto& th : threads) th.join();
    if (best_witness) return std::make_pair(best.load(), *best_witness);
    return std::nullopt;
}

template <class PerProfile>
PropertyReport run_check(Property prop, const ProfileDomain& dom, int jobs, PerProfile&& fn) {
    PropertyReport report;
    report.property = prop;
    report.seed = dom.seed;
    auto indices = dom.visit_indices();
    report.checked = indices.size();
    auto hit = scan_first(indices.size(), jobs, [&](uint64_t i) -> std::optional<Witness> {
        return fn(dom.profile_at(indices[i]));
    });
    if (hit) {
        report.verdict = PropertyReport::Verdict::Violated;
        report.witness = hit->second;
    } else {
        report.verdict = dom.policy == ProfileDomain::Policy::Exhaustive
                             ? PropertyReport::Verdict::HoldsExhaustive
                             : PropertyReport::Verdict::HoldsSampled;
    }
    return report;
}

inline Profile permute_agents(const Profile& prof, const std::vector<int>& perm) {
    Profile out = prof;
    for (size_t j = 0; j < perm.size(); ++j) out.prefs[perm[j]] = prof.prefs[j];
    return out;
}

inline Allocation permute_agents(const Allocation& alloc, const std::vector<int>& perm) {
    Allocation out = alloc;
    for (size_t t = 0; t < alloc.by_type.size(); ++t)
        for (size_t j = 0; j < perm.size(); ++j)
            out.by_type[t][perm[j]] = alloc.by_type[t][j];
    return out;
}

inline LexPref permute_items(const LexPref& pref, const std::vector<std::vector<int>>& perms) {
    LexPref out = pref;
    int n = pref.net.num_items;
    for (int t = 0; t < pref.net.num_types; ++t) {
        const auto& parents = pref.net.parents[t];
        for (size_t key = 0; key < pref.net.cpt[t].size(); ++key) {
            // decode parent items, remap them, re-encode
            size_t k = key, new_key = 0, stride = 1;
            for (int par : parents) {
                new_key += (size_t)perms[par][k % n] * stride;
                k /= n;
                stride *= n;
            }
            ItemOrder row(n);
            for (int pos = 0; pos < n; ++pos) row[pos] = perms[t][pref.net.cpt[t][key][pos]];
            out.net.cpt[t][new_key] = row;
        }
    }
    return out;
}

inline Profile permute_items(const Profile& prof, const std::vector<std::vector<int>>& perms) {
    Profile out = prof;
    for (auto& pref : out.prefs) pref = permute_items(pref, perms);
    return out;
}

inline Allocation permute_items(const Allocation& alloc, const std::vector<std::vector<int>>& perms) {
    Allocation out = alloc;
    for (size_t t = 0; t < alloc.by_type.size(); ++t)
        for (auto& item : out.by_type[t]) item = perms[t][item];
    return out;
}

inline std::vector<std::vector<int>> all_permutations(int n) {
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<std::vector<int>> out;
    do out.push_back(perm);
    while (std::next_permutation(perm.begin(), perm.end()));
    return out;
}

}  // namespace detail

inline PropertyReport check_anonymity(const Mechanism& mech, const ProfileDomain& dom, int jobs = 1) {
    auto perms = detail::all_permutations(dom.inst.num_agents);
    return detail::run_check(Property::Anonymity, dom, jobs, [&](const Profile& prof) -> std::optional<Witness> {
        Allocation base = mech.eval(prof);
        for (const auto& perm : perms) {
            Allocation lhs = mech.eval(detail::permute_agents(prof, perm));
            Allocation rhs = detail::permute_agents(base, perm);
            if (lhs != rhs) {
                Witness w;
                w.profile = prof;
                w.agent_perm = perm;
                w.before = rhs;
                w.after = lhs;
                w.note = "f(perm(P)) != perm(f(P))";
                return w;
            }
        }
        return std::nullopt;
    });
}

inline PropertyReport check_typewise_neutrality(const Mechanism& mech, const ProfileDomain& dom,
                                                int jobs = 1) {
    int n = dom.inst.num_agents, p = dom.inst.num_types;
    auto item_perms = detail::all_permutations(n);
    uint64_t tuples = 1;
    for (int t = 0; t < p; ++t) tuples *= item_perms.size();
    return detail::run_check(Property::TypewiseNeutrality, dom, jobs,
                             [&](const Profile& prof) -> std::optional<Witness> {
        Allocation base = mech.eval(prof);
        for (uint64_t code = 0; code < tuples; ++code) {
            std::vector<std::vector<int>> perms(p);
            uint64_t k = code;
            for (int t = 0; t < p; ++t) {
                perms[t] = item_perms[k % item_perms.size()];
                k /= item_perms.size();
            }
            Allocation lhs = mech.eval(detail::permute_items(prof, perms));
            Allocation rhs = detail::permute_items(base, perms);
            if (lhs != rhs) {
                Witness w;
                w.profile = prof;
                w.item_perms = perms;
                w.before = rhs;
                w.after = lhs;
                w.note = "f(perm(P)) != perm(f(P)) under per-type item renaming";
                return w;
            }
        }
        return std::nullopt;
    });
}

inline PropertyReport check_nonbossiness(const Mechanism& mech, const ProfileDomain& dom, int jobs = 1) {
    int n = dom.inst.num_agents;
    return detail::run_check(Property::NonBossiness, dom, jobs,
                             [&](const Profile& prof) -> std::optional<Witness> {
        Allocation base = mech.eval(prof);
        for (int j = 0; j < n; ++j) {
            for (const auto& alt : dom.agent_prefs[j]) {
                if (same_induced_order(alt, prof.prefs[j])) continue;
                Profile changed = prof;
                changed.prefs[j] = alt;
                Allocation out = mech.eval(changed);
                if (out.bundle_of(j) == base.bundle_of(j) && out != base) {
                    Witness w;
                    w.profile = prof;
                    w.agent = j;
                    w.misreport = alt;
                    w.before = base;
                    w.after = out;
                    w.note = "misreport changes others' bundles but not the misreporter's";
                    return w;
                }
            }
        }
        return std::nullopt;
    });
}

inline PropertyReport check_nonbossiness_important(const Mechanism& mech, const ProfileDomain& dom,
                                                   const std::vector<std::vector<LexPref>>* misreports = nullptr,
                                                   int jobs = 1) {
    int n = dom.inst.num_agents, p = dom.inst.num_types;
    const auto& classes = misreports ? *misreports : dom.agent_prefs;
    // expansions are precomputed per (agent, pref-in-class)
    std::vector<std::vector<std::vector<std::vector<ItemOrder>>>> expanded(n);
    for (int j = 0; j < n; ++j)
        for (const auto& pref : classes[j]) {
            auto aligned = project_to_order(pref, dom.order);
            if (!aligned)
                throw DomainError("non-bossiness-important: preference not O-legal under the domain order");
            expanded[j].push_back(expand_full(*aligned));
        }
    return detail::run_check(Property::NonBossinessImportant, dom, jobs,
                             [&](const Profile& prof) -> std::optional<Witness> {
        Allocation base = mech.eval(prof);
        for (int j = 0; j < n; ++j) {
            auto truth = project_to_order(prof.prefs[j], dom.order);
            auto truth_rows = expand_full(*truth);
            for (size_t m = 0; m < classes[j].size(); ++m) {
                const auto& alt_rows = expanded[j][m];
                int first_diff = -1;
                for (int pos = 0; pos < p; ++pos)
                    if (alt_rows[pos] != truth_rows[pos]) { first_diff = pos; break; }
                if (first_diff < 0) continue;   // identical report
                Profile changed = prof;
                changed.prefs[j] = classes[j][m];
                Allocation out = mech.eval(changed);
                // The misreport leaves all rows before first_diff intact, so
                // it qualifies at every level pos <= first_diff.
                std::vector<int> prefix;
                for (int pos = 0; pos <= first_diff; ++pos) {
                    prefix.push_back(dom.order[pos]);
                    auto before = restrict_allocation(base, prefix);
                    auto after = restrict_allocation(out, prefix);
                    bool other_changed = false;
                    for (int k = 0; k < n && !other_changed; ++k)
                        other_changed = k != j && after.bundle_of(k) != before.bundle_of(k);
                    if (other_changed && after.bundle_of(j) == before.bundle_of(j)) {
                        Witness w;
                        w.profile = prof;
                        w.agent = j;
                        w.misreport = classes[j][m];
                        w.before = base;
                        w.after = out;
                        w.note = "less-important-type misreport changes others' allocation of the " +
                                 std::to_string(pos + 1) + " most important types only";
                        return w;
                    }
                }
            }
        }
        return std::nullopt;
    });
}

inline PropertyReport check_monotonicity(const Mechanism& mech, const ProfileDomain& dom, int jobs = 1) {
    int n = dom.inst.num_agents, p = dom.inst.num_types;
    int items = dom.inst.num_agents;
    auto bundle_code = [items, p](const Bundle& b) {
        int c = 0;
        for (int t = 0; t < p; ++t) c = c * items + b[t];
        return c;
    };
    // rank position arrays per (agent, pref-in-class)
    std::vector<std::vector<std::vector<int>>> ranks(n);
    for (int j = 0; j < n; ++j)
        for (const auto& pref : dom.agent_prefs[j]) {
            auto ranked = rank_bundles(pref);
            std::vector<int> pos(ranked.size());
            for (size_t i = 0; i < ranked.size(); ++i) pos[bundle_code(ranked[i])] = (int)i;
            ranks[j].push_back(std::move(pos));
        }
    auto find_rank_index = [&](int j, const LexPref& pref) {
        for (size_t m = 0; m < dom.agent_prefs[j].size(); ++m)
            if (same_induced_order(dom.agent_prefs[j][m], pref)) return (int)m;
        throw DomainError("monotonicity: profile preference not in the domain class");
    };
    return detail::run_check(Property::Monotonicity, dom, jobs,
                             [&](const Profile& prof) -> std::optional<Witness> {
        Allocation base = mech.eval(prof);
        for (int j = 0; j < n; ++j) {
            const auto& true_rank = ranks[j][find_rank_index(j, prof.prefs[j])];
            for (size_t m = 0; m < dom.agent_prefs[j].size(); ++m) {
                const auto& alt_rank = ranks[j][m];
                if (alt_rank == true_rank) continue;
                // Y: bundles whose rank strictly rose under the misreport. The
                // qualifying misreports only raise Y: relative order must be
                // preserved within Y and within its complement (otherwise even
                // serial dictatorship would be flagged, contradicting the
                // local-to-global transfer).
                std::vector<int> raised, rest;
                for (size_t c = 0; c < alt_rank.size(); ++c)
                    (alt_rank[c] < true_rank[c] ? raised : rest).push_back((int)c);
                auto preserved = [&](const std::vector<int>& set) {
                    for (size_t a = 0; a < set.size(); ++a)
                        for (size_t b = a + 1; b < set.size(); ++b)
                            if ((true_rank[set[a]] < true_rank[set[b]]) !=
                                (alt_rank[set[a]] < alt_rank[set[b]]))
                                return false;
                    return true;
                };
                if (!preserved(raised) || !preserved(rest)) continue;
                Profile changed = prof;
                changed.prefs[j] = dom.agent_prefs[j][m];
                Allocation out = mech.eval(changed);
                int new_code = bundle_code(out.bundle_of(j));
                int old_code = bundle_code(base.bundle_of(j));
                bool in_y = std::find(raised.begin(), raised.end(), new_code) != raised.end();
                if (new_code != old_code && !in_y) {
                    Witness w;
                    w.profile = prof;
                    w.agent = j;
                    w.misreport = dom.agent_prefs[j][m];
                    w.before = base;
                    w.after = out;
                    w.note = "rank-raising misreport moved the agent outside {old bundle} + raised set";
                    return w;
                }
            }
        }
        return std::nullopt;
    });
}

inline PropertyReport check_pareto(const Mechanism& mech, const ProfileDomain& dom, int jobs = 1) {
    auto alternatives = enumerate_allocations(dom.inst, all_types(dom.inst), 1u << 22);
    int n = dom.inst.num_agents;
    return detail::run_check(Property::ParetoOptimality, dom, jobs,
                             [&](const Profile& prof) -> std::optional<Witness> {
        Allocation base = mech.eval(prof);
        for (const auto& alt_partial : alternatives) {
            Allocation alt = to_allocation(alt_partial);
            bool weakly_better = true, strictly = false;
            for (int j = 0; j < n && weakly_better; ++j) {
                int cmp = lex_compare(prof.prefs[j], alt.bundle_of(j), base.bundle_of(j));
                if (cmp < 0) weakly_better = false;
                if (cmp > 0) strictly = true;
            }
            if (weakly_better && strictly) {
                Witness w;
                w.profile = prof;
                w.dominating = alt;
                w.before = base;
                w.after = alt;
                w.note = "another allocation weakly improves everyone and strictly improves someone";
                return w;
            }
        }
        return std::nullopt;
    });
}

inline PropertyReport check_strategyproofness(const Mechanism& mech, const ProfileDomain& dom,
                                              const std::vector<std::vector<LexPref>>* misreports = nullptr,
                                              int jobs = 1) {
    int n = dom.inst.num_agents;
    const auto& classes = misreports ? *misreports : dom.agent_prefs;
    return detail::run_check(Property::Strategyproofness, dom, jobs,
                             [&](const Profile& prof) -> std::optional<Witness> {
        Allocation base = mech.eval(prof);
        for (int j = 0; j < n; ++j) {
            Bundle truthful = base.bundle_of(j);
            for (const auto& alt : classes[j]) {
                if (same_induced_order(alt, prof.prefs[j])) continue;
                Profile changed = prof;
                changed.prefs[j] = alt;
                Allocation out = mech.eval(changed);
                if (lex_compare(prof.prefs[j], out.bundle_of(j), truthful) > 0) {
                    Witness w;
                    w.profile = prof;
                    w.agent = j;
                    w.misreport = alt;
                    w.before = base;
                    w.after = out;
                    w.note = "beneficial manipulation";
                    return w;
                }
            }
        }
        return std::nullopt;
    });
}

inline PropertyReport check_property(Property prop, const Mechanism& mech, const ProfileDomain& dom,
                                     int jobs = 1) {
    switch (prop) {
        case Property::Anonymity: return check_anonymity(mech, dom, jobs);
        case Property::TypewiseNeutrality: return check_typewise_neutrality(mech, dom, jobs);
        case Property::NonBossiness: return check_nonbossiness(mech, dom, jobs);
        case Property::NonBossinessImportant: return check_nonbossiness_important(mech, dom, nullptr, jobs);
        case Property::Monotonicity: return check_monotonicity(mech, dom, jobs);
        case Property::ParetoOptimality: return check_pareto(mech, dom, jobs);
        case Property::Strategyproofness: return check_strategyproofness(mech, dom, nullptr, jobs);
    }
    throw ConfigError("unknown property");
}

// Full single-type domain for checking a local mechanism in isolation.
inline ProfileDomain make_local_domain(int n, uint64_t budget = 1u << 22) {
    Instance single = Instance::make(n, 1);
    return make_full_domain(single, {0}, budget);
}

struct TransferEntry {
    Property property{};
    size_t composition = 0;
    bool locals_hold = false;
    bool sequential_holds = false;
    bool consistent() const { return locals_hold == sequential_holds; }
};

// For each property and each composition: check the property for every local
// mechanism (over the full single-type domain) and for the sequential
// composition (over `dom`). The two verdicts must agree per the transfer
// theorems; a mismatch indicates an implementation bug, not a theorem failure.
inline std::vector<TransferEntry> check_transfer_theorems(
    const Instance& inst, const std::vector<int>& order,
    const std::vector<std::vector<LocalMechanism>>& compositions, const ProfileDomain& dom,
    const std::vector<Property>& props, int jobs = 1) {
    ProfileDomain local_dom = make_local_domain(inst.num_agents);
    std::vector<TransferEntry> out;
    for (size_t c = 0; c < compositions.size(); ++c) {
        SequentialMechanism seq{order, compositions[c]};
        Mechanism seq_mech = make_mechanism(inst, seq);
        for (Property x : props) {
            Property local_x = x == Property::NonBossinessImportant ? Property::NonBossiness : x;
            TransferEntry entry;
            entry.property = x;
            entry.composition = c;
            entry.locals_hold = true;
            for (const auto& local : compositions[c]) {
                Mechanism lm = make_local_mechanism(local);
                if (!check_property(local_x, lm, local_dom, jobs).holds()) {
                    entry.locals_hold = false;
                    break;
                }
            }
            entry.sequential_holds = check_property(x, seq_mech, dom, jobs).holds();
            out.push_back(entry);
        }
    }
    return out;
}

}  // namespace mtra
