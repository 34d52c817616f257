#pragma once

// Shared builders for the test suite and the acceptance checks: the running
// two-agent example, the mixed-importance counterexample, deliberately broken
// local mechanisms, and mechanism tables that fail to decompose.

#include <filesystem>

#include "mtra/mtra.hpp"

namespace helpers {

inline std::filesystem::path fixture(const std::string& name) {
    return std::filesystem::path(MTRA_FIXTURE_DIR) / name;
}

// The single-agent running example: p=2, type 2 depends on type 1, ranking
// (1_1,1_2) > (1_1,2_2) > (2_1,2_2) > (2_1,1_2).
inline mtra::LexPref example_pref() {
    mtra::LexPref pref;
    pref.importance = {0, 1};
    pref.net.num_types = 2;
    pref.net.num_items = 2;
    pref.net.parents = {{}, {0}};
    pref.net.cpt = {{{0, 1}}, {{0, 1}, {1, 0}}};
    return pref;
}

inline mtra::LexPref separable_pref(int p, int n, std::vector<int> importance,
                                    std::vector<mtra::ItemOrder> rows) {
    mtra::LexPref pref;
    pref.importance = std::move(importance);
    pref.net.num_types = p;
    pref.net.num_items = n;
    pref.net.parents.assign(p, {});
    pref.net.cpt.resize(p);
    for (int t = 0; t < p; ++t) pref.net.cpt[t] = {rows.at(t)};
    return pref;
}

// The mixed-importance strategyproofness counterexample: agent 0 ranks type 1
// (houses) first with a conditional car preference; agent 1 ranks cars first,
// separably. Mechanism: SD(2,1) for houses then SD(1,2) for cars.
inline mtra::Profile counterexample_profile() {
    mtra::Profile prof;
    mtra::LexPref a1 = example_pref();   // same shape: 1_H > 2_H; cars follow houses
    prof.prefs.push_back(a1);
    prof.prefs.push_back(separable_pref(2, 2, {1, 0}, {{0, 1}, {1, 0}}));
    return prof;
}

inline mtra::SequentialMechanism counterexample_mechanism() {
    mtra::SequentialMechanism mech;
    mech.order = {0, 1};
    mech.locals = {mtra::LocalMechanism::sd({1, 0}), mtra::LocalMechanism::sd({0, 1})};
    return mech;
}

inline mtra::SequentialMechanism seq_sd(const std::vector<int>& order,
                                        const std::vector<std::vector<int>>& priorities) {
    mtra::SequentialMechanism mech;
    mech.order = order;
    mech.locals.resize(order.size());
    for (size_t t = 0; t < order.size(); ++t) mech.locals[t] = mtra::LocalMechanism::sd(priorities[t]);
    return mech;
}

// All sequential SD compositions for a given instance: one SD priority choice
// per type, enumerated in canonical (last type fastest) order.
inline std::vector<mtra::SequentialMechanism> all_sd_compositions(const mtra::Instance& inst,
                                                                  const std::vector<int>& order) {
    std::vector<std::vector<int>> priorities;
    {
        std::vector<int> perm(inst.num_agents);
        std::iota(perm.begin(), perm.end(), 0);
        do priorities.push_back(perm);
        while (std::next_permutation(perm.begin(), perm.end()));
    }
    std::vector<mtra::SequentialMechanism> out;
    std::vector<size_t> odo(inst.num_types, 0);
    while (true) {
        std::vector<std::vector<int>> pick;
        for (size_t i = 0; i < odo.size(); ++i) pick.push_back(priorities[odo[i]]);
        out.push_back(seq_sd(order, pick));
        int i = (int)odo.size() - 1;
        for (; i >= 0; --i) {
            if (++odo[i] < priorities.size()) break;
            odo[i] = 0;
        }
        if (i < 0) break;
    }
    return out;
}

inline std::vector<mtra::LocalProfile> all_local_profiles(int n) {
    std::vector<mtra::ItemOrder> perms;
    mtra::ItemOrder perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    do perms.push_back(perm);
    while (std::next_permutation(perm.begin(), perm.end()));
    std::vector<mtra::LocalProfile> out;
    std::vector<size_t> odo(n, 0);
    while (true) {
        mtra::LocalProfile lp;
        for (size_t i = 0; i < odo.size(); ++i) lp.push_back(perms[odo[i]]);
        out.push_back(lp);
        int i = n - 1;
        for (; i >= 0; --i) {
            if (++odo[i] < perms.size()) break;
            odo[i] = 0;
        }
        if (i < 0) break;
    }
    return out;
}

// Bossy local mechanism, n=3: serial dictatorship (1,2,3) except that when
// agent 1 reports exactly 1 > 3 > 2, agents 2 and 3 get swapped items while
// agent 1 keeps hers.
inline mtra::LocalMechanism bossy_local() {
    std::map<mtra::LocalProfile, std::vector<int>> table;
    for (const auto& lp : all_local_profiles(3)) {
        if (lp[0] == mtra::ItemOrder{0, 2, 1}) table[lp] = {0, 2, 1};
        else table[lp] = mtra::run_serial_dictatorship({0, 1, 2}, lp);
    }
    return mtra::LocalMechanism::from_table(std::move(table));
}

// Non-monotone local mechanism, n=3: agent 1's report alone decides between
// three fixed allocations, so raising her allocated item's rank can move her
// to a third item.
inline mtra::LocalMechanism nonmonotone_local() {
    std::map<mtra::LocalProfile, std::vector<int>> table;
    for (const auto& lp : all_local_profiles(3)) {
        if (lp[0] == mtra::ItemOrder{0, 1, 2}) table[lp] = {2, 0, 1};
        else if (lp[0] == mtra::ItemOrder{1, 0, 2}) table[lp] = {1, 0, 2};
        else table[lp] = mtra::run_serial_dictatorship({0, 1, 2}, lp);
    }
    return mtra::LocalMechanism::from_table(std::move(table));
}

// Constant local mechanism: every agent gets her same-index item regardless of
// reports. Violates typewise neutrality and Pareto-optimality.
inline mtra::LocalMechanism constant_local(int n) {
    std::map<mtra::LocalProfile, std::vector<int>> table;
    std::vector<int> identity(n);
    std::iota(identity.begin(), identity.end(), 0);
    for (const auto& lp : all_local_profiles(n)) table[lp] = identity;
    return mtra::LocalMechanism::from_table(std::move(table));
}

// --- Non-decomposable mechanism tables (n=2, p=2, order 1 > 2) -------------

inline std::vector<int> sd_over(const mtra::LocalProfile& lp, const std::vector<int>& priority) {
    return mtra::run_serial_dictatorship(priority, lp);
}

// (a) The type-1 allocation peeks at agent 1's type-2 CPT: two profiles with
// identical type-1 local preferences get different type-1 allocations.
inline mtra::MechanismTable cpt_peeking_table(const mtra::Instance& inst) {
    auto dom = mtra::make_full_domain(inst, {0, 1});
    std::vector<mtra::Profile> profiles;
    for (uint64_t i = 0; i < dom.profile_count(); ++i) profiles.push_back(dom.profile_at(i));
    return mtra::build_table(inst, {0, 1}, std::move(profiles), [&](const mtra::Profile& prof) {
        mtra::LocalProfile lp0;
        for (const auto& pref : prof.prefs) lp0.push_back(pref.net.cpt[0][0]);
        auto alloc0 = sd_over(lp0, {0, 1});
        if (prof.prefs[0].net.cpt[1][0] == mtra::ItemOrder{1, 0})
            std::swap(alloc0[0], alloc0[1]);
        mtra::LocalProfile lp1;
        for (int j = 0; j < 2; ++j)
            lp1.push_back(prof.prefs[j].net.cpt[1][alloc0[j]]);
        auto alloc1 = sd_over(lp1, {0, 1});
        return mtra::Allocation{{alloc0, alloc1}};
    });
}

// (b) The type-2 allocation peeks at agent 2's type-1 local order beyond the
// realized type-1 allocation.
inline mtra::MechanismTable pref_peeking_table(const mtra::Instance& inst) {
    auto dom = mtra::make_full_domain(inst, {0, 1});
    std::vector<mtra::Profile> profiles;
    for (uint64_t i = 0; i < dom.profile_count(); ++i) profiles.push_back(dom.profile_at(i));
    return mtra::build_table(inst, {0, 1}, std::move(profiles), [&](const mtra::Profile& prof) {
        mtra::LocalProfile lp0;
        for (const auto& pref : prof.prefs) lp0.push_back(pref.net.cpt[0][0]);
        auto alloc0 = sd_over(lp0, {0, 1});
        mtra::LocalProfile lp1;
        for (int j = 0; j < 2; ++j)
            lp1.push_back(prof.prefs[j].net.cpt[1][alloc0[j]]);
        auto alloc1 = sd_over(lp1, {0, 1});
        if (prof.prefs[1].net.cpt[0][0] == mtra::ItemOrder{1, 0})
            std::swap(alloc1[0], alloc1[1]);
        return mtra::Allocation{{alloc0, alloc1}};
    });
}

// (c) A mechanism that processes the types in the other order, tabulated over
// separable profiles: type 2 is allocated by SD first, type 1's rule depends
// on the realized type-2 allocation. Not decomposable under 1 > 2.
inline mtra::MechanismTable order_mismatched_table(const mtra::Instance& inst) {
    auto dom = mtra::make_separable_domain(inst, {0, 1});
    std::vector<mtra::Profile> profiles;
    for (uint64_t i = 0; i < dom.profile_count(); ++i) profiles.push_back(dom.profile_at(i));
    return mtra::build_table(inst, {0, 1}, std::move(profiles), [&](const mtra::Profile& prof) {
        mtra::LocalProfile lp1;
        for (const auto& pref : prof.prefs) lp1.push_back(pref.net.cpt[1][0]);
        auto alloc1 = sd_over(lp1, {0, 1});
        mtra::LocalProfile lp0;
        for (const auto& pref : prof.prefs) lp0.push_back(pref.net.cpt[0][0]);
        auto alloc0 = sd_over(lp0, alloc1[0] == 0 ? std::vector<int>{0, 1} : std::vector<int>{1, 0});
        return mtra::Allocation{{alloc0, alloc1}};
    });
}

// Independent re-validation of a decomposition failure witness: re-derive the
// claimed conflict from the table rows and the profiles' expanded preferences.
inline bool revalidate_decompose_witness(const mtra::MechanismTable& table,
                                         const std::vector<int>& order,
                                         const mtra::DecomposeWitness& w) {
    if (w.type < 0) return false;
    const auto& pa = table.profiles[w.profile_a];
    const auto& pb = table.profiles[w.profile_b];
    const auto& A = table.outputs[w.profile_a];
    const auto& B = table.outputs[w.profile_b];
    int n = table.inst.num_agents;

    int pos = -1;
    for (size_t i = 0; i < order.size(); ++i)
        if (order[i] == w.type) pos = (int)i;
    if (pos < 0) return false;

    // both profiles must be on the same realized path up to the witness type
    for (int h = 0; h < pos; ++h)
        if (A.by_type[order[h]] != B.by_type[order[h]]) return false;

    std::vector<std::vector<std::vector<mtra::ItemOrder>>> ea, eb;
    for (int j = 0; j < n; ++j) {
        auto a = mtra::project_to_order(pa.prefs[j], order);
        auto b = mtra::project_to_order(pb.prefs[j], order);
        if (!a || !b) return false;
        ea.push_back(mtra::expand_full(*a));
        eb.push_back(mtra::expand_full(*b));
    }
    auto conditional_row = [&](const std::vector<std::vector<mtra::ItemOrder>>& rows, int at,
                               const mtra::Allocation& alloc, int agent) {
        int key = 0;
        for (int h = at - 1; h >= 0; --h) key = key * n + alloc.by_type[order[h]][agent];
        return rows[at][key];
    };

    if (w.reason.find("identical local preferences") != std::string::npos) {
        // step-1 conflict: same conditional local profile at the type, yet
        // different allocations of the type
        for (int j = 0; j < n; ++j)
            if (conditional_row(ea[j], pos, A, j) != conditional_row(eb[j], pos, B, j)) return false;
        return A.by_type[w.type] != B.by_type[w.type];
    }
    // step-3 conflict: same allocation through the type and identical
    // conditional preferences below it, yet different residual allocations
    if (A.by_type[w.type] != B.by_type[w.type]) return false;
    for (int j = 0; j < n; ++j)
        for (size_t at = pos + 1; at < order.size(); ++at) {
            // compare all rows conditioned on the (shared) realized prefix
            // and any completion of the unrealized part; the realized prefix
            // pins positions <= pos, deeper positions range over everything
            int fixed = pos + 1;
            int free_keys = 1;
            for (size_t h = fixed; h < at; ++h) free_keys *= n;
            int base = 0;
            for (int h = fixed - 1; h >= 0; --h) base = base * n + A.by_type[order[h]][j];
            int stride = 1;
            for (int h = 0; h < fixed; ++h) stride *= n;
            for (int k = 0; k < free_keys; ++k)
                if (ea[j][at][base + k * stride] != eb[j][at][base + k * stride]) return false;
        }
    bool differs = false;
    for (size_t at = pos + 1; at < order.size(); ++at)
        differs = differs || A.by_type[order[at]] != B.by_type[order[at]];
    return differs;
}

// The truthful-run allocation the reduction is designed to produce: every
// agent keeps her own item except that each chain agent takes the next item of
// her cycle for her variable's type, the first clause agent takes the special
// agent's tail item, and the special agent takes the first clause agent's.
inline mtra::Allocation expected_truthful(const mtra::Reduction& red) {
    int n = red.inst.num_agents, p = red.inst.num_types;
    mtra::Allocation out;
    out.by_type.assign(p, {});
    for (int t = 0; t < p; ++t) {
        out.by_type[t].resize(n);
        std::iota(out.by_type[t].begin(), out.by_type[t].end(), 0);   // own items
    }
    for (int value : {0, 1})
        for (int i = 1; i <= red.s; ++i)
            for (int j = 1; j <= red.t; ++j)
                out.by_type[i - 1][red.chain(value, i, j)] =
                    red.chain(value, i, j < red.t ? j + 1 : 1);
    out.by_type[p - 1][red.clause_agent(1)] = 0;
    out.by_type[p - 1][red.special()] = red.clause_agent(1);
    return out;
}

// All 3-CNF formulas with exactly s variables and t clauses, where a clause is
// a non-decreasing variable triple with any sign pattern and formulas are
// multisets of clauses.
inline std::vector<mtra::CnfFormula> all_formulas(int s, int t) {
    std::vector<std::array<int, 3>> clauses;
    for (int v1 = 1; v1 <= s; ++v1)
        for (int v2 = v1; v2 <= s; ++v2)
            for (int v3 = v2; v3 <= s; ++v3)
                for (int signs = 0; signs < 8; ++signs)
                    clauses.push_back({signs & 1 ? -v1 : v1, signs & 2 ? -v2 : v2,
                                       signs & 4 ? -v3 : v3});
    std::vector<mtra::CnfFormula> out;
    std::vector<int> pick(t, 0);
    // non-decreasing clause-index tuples = multisets of clauses
    auto rec = [&](auto&& self, int depth, int from) -> void {
        if (depth == t) {
            mtra::CnfFormula f;
            f.num_vars = s;
            for (int idx : pick) f.clauses.push_back(clauses[idx]);
            out.push_back(std::move(f));
            return;
        }
        for (int idx = from; idx < (int)clauses.size(); ++idx) {
            pick[depth] = idx;
            self(self, depth + 1, idx);
        }
    };
    rec(rec, 0, 0);
    return out;
}

// Brute-force satisfiability oracle.
inline bool brute_force_sat(const mtra::CnfFormula& f) {
    for (int mask = 0; mask < (1 << f.num_vars); ++mask) {
        std::vector<bool> phi(f.num_vars);
        for (int i = 0; i < f.num_vars; ++i) phi[i] = (mask >> i) & 1;
        if (f.satisfied_by(phi)) return true;
    }
    return false;
}

}  // namespace helpers
