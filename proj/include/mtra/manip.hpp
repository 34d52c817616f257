#pragma once

// Beneficial-manipulation search, misreport classes, and the 3-SAT encoding
// into sequential-mechanism manipulation instances.

#include <array>
#include <istream>
#include <sstream>

#include "mtra/verify.hpp"

namespace mtra {

enum class MisreportClass { SeparableExhaustive, TopItemPerType, FullExhaustive };

inline const char* to_string(MisreportClass c) {
    switch (c) {
        case MisreportClass::SeparableExhaustive: return "separable-exhaustive";
        case MisreportClass::TopItemPerType: return "top-item-per-type";
        case MisreportClass::FullExhaustive: return "full-exhaustive";
    }
    return "?";
}

// One misreport per bundle: the true preference with the bundle's item rotated
// to the top of each type's local order. Requires a separable true preference.
inline std::vector<LexPref> top_item_misreports(const LexPref& true_pref, uint64_t budget = 1u << 20) {
    if (!true_pref.net.separable())
        throw ConfigError("top-item misreports require a separable true preference");
    int n = true_pref.net.num_items, p = true_pref.net.num_types;
    uint64_t count = 1;
    for (int t = 0; t < p; ++t) {
        count *= (uint64_t)n;
        if (count > budget)
            throw EnumerationError("top-item misreport class over budget " + std::to_string(budget));
    }
    std::vector<LexPref> out;
    out.reserve(count);
    for_each_bundle(n, p, [&](const Bundle& b) { out.push_back(perturb_raise(true_pref, b)); });
    return out;
}

inline std::vector<LexPref> build_misreports(const Instance& inst, const std::vector<int>& order,
                                             const LexPref& true_pref, MisreportClass cls,
                                             uint64_t budget) {
    switch (cls) {
        case MisreportClass::SeparableExhaustive:
            return enumerate_prefs(inst, order, no_parents(inst), budget);
        case MisreportClass::TopItemPerType:
            return top_item_misreports(true_pref, budget);
        case MisreportClass::FullExhaustive:
            return enumerate_prefs(inst, order, full_parents(inst, order), budget);
    }
    throw ConfigError("unknown misreport class");
}

struct ManipulationOutcome {
    enum class Status { Found, None, Inconclusive } status = Status::None;
    uint64_t tried = 0;             // mechanism evaluations beyond the truthful one
    int agent = -1;
    std::optional<LexPref> misreport;
    Allocation truthful, manipulated;
};

inline const char* to_string(ManipulationOutcome::Status s) {
    switch (s) {
        case ManipulationOutcome::Status::Found: return "found";
        case ManipulationOutcome::Status::None: return "none";
        case ManipulationOutcome::Status::Inconclusive: return "inconclusive";
    }
    return "?";
}

// First beneficial manipulation in canonical order (agents as listed, then
// misreports as listed). Stops at `budget` evaluations with an inconclusive
// verdict.
inline ManipulationOutcome find_manipulation(const Mechanism& mech, const Profile& prof,
                                             const std::vector<int>& agents,
                                             const std::vector<std::vector<LexPref>>& misreports,
                                             uint64_t budget = UINT64_MAX) {
    ManipulationOutcome out;
    out.truthful = mech.eval(prof);
    for (size_t a = 0; a < agents.size(); ++a) {
        int j = agents[a];
        Bundle honest = out.truthful.bundle_of(j);
        for (const auto& alt : misreports.at(a)) {
            if (same_induced_order(alt, prof.prefs[j])) continue;
            if (out.tried >= budget) {
                out.status = ManipulationOutcome::Status::Inconclusive;
                return out;
            }
            Profile changed = prof;
            changed.prefs[j] = alt;
            Allocation got = mech.eval(changed);
            ++out.tried;
            if (lex_compare(prof.prefs[j], got.bundle_of(j), honest) > 0) {
                out.status = ManipulationOutcome::Status::Found;
                out.agent = j;
                out.misreport = alt;
                out.manipulated = got;
                return out;
            }
        }
    }
    out.status = ManipulationOutcome::Status::None;
    return out;
}

// ---------------------------------------------------------------------------
// 3-CNF formulas
// ---------------------------------------------------------------------------

// A literal is a signed 1-based variable index, DIMACS style.
struct CnfFormula {
    int num_vars = 0;
    std::vector<std::array<int, 3>> clauses;

    void validate() const {
        if (num_vars < 1) throw DomainError("formula: need at least one variable");
        for (const auto& cl : clauses)
            for (int lit : cl)
                if (lit == 0 || std::abs(lit) > num_vars)
                    throw DomainError("formula: literal out of range");
    }

    bool satisfied_by(const std::vector<bool>& phi) const {
        for (const auto& cl : clauses) {
            bool sat = false;
            for (int lit : cl)
                if (phi.at(std::abs(lit) - 1) == (lit > 0)) { sat = true; break; }
            if (!sat) return false;
        }
        return true;
    }
};

inline CnfFormula parse_dimacs(std::istream& in) {
    CnfFormula f;
    int expect_clauses = -1;
    std::string line;
    std::vector<int> pending;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == 'c' || line[0] == '%') continue;
        std::istringstream ls(line);
        if (line[0] == 'p') {
            std::string p, kind;
            if (!(ls >> p >> kind >> f.num_vars >> expect_clauses) || kind != "cnf")
                throw ParseError("dimacs: malformed problem line: " + line);
            continue;
        }
        int lit;
        while (ls >> lit) {
            if (lit == 0) {
                if (pending.size() != 3)
                    throw ParseError("dimacs: expected exactly 3 literals per clause, got " +
                                     std::to_string(pending.size()));
                f.clauses.push_back({pending[0], pending[1], pending[2]});
                pending.clear();
            } else {
                pending.push_back(lit);
            }
        }
    }
    if (!pending.empty()) throw ParseError("dimacs: unterminated clause");
    if (expect_clauses >= 0 && (int)f.clauses.size() != expect_clauses)
        throw ParseError("dimacs: clause count does not match header");
    f.validate();
    return f;
}

inline CnfFormula parse_dimacs(const std::string& text) {
    std::istringstream in(text);
    return parse_dimacs(in);
}

// Plain DPLL with unit propagation; plenty for reduction-scale formulas.
namespace detail {
inline bool dpll(const CnfFormula& f, std::vector<int>& assign /* -1 unset, 0/1 set */) {
    while (true) {
        int unit = 0;
        bool all_sat = true;
        for (const auto& cl : f.clauses) {
            bool sat = false;
            int unset_lit = 0, unset_count = 0;
            for (int lit : cl) {
                int v = assign[std::abs(lit) - 1];
                if (v < 0) {
                    if (unset_lit != lit) ++unset_count;
                    unset_lit = lit;
                } else if (v == (lit > 0)) {
                    sat = true;
                    break;
                }
            }
            if (sat) continue;
            all_sat = false;
            if (unset_count == 0) return false;          // conflict
            if (unset_count == 1 && unit == 0) unit = unset_lit;
        }
        if (all_sat) return true;
        if (unit == 0) break;
        assign[std::abs(unit) - 1] = unit > 0 ? 1 : 0;
    }
    int var = -1;
    for (int i = 0; i < f.num_vars; ++i)
        if (assign[i] < 0) { var = i; break; }
    if (var < 0) return false;   // fully assigned but not all satisfied
    for (int v : {1, 0}) {
        auto saved = assign;
        assign[var] = v;
        if (dpll(f, assign)) return true;
        assign = saved;
    }
    return false;
}
}  // namespace detail

inline std::optional<std::vector<bool>> solve_sat(const CnfFormula& f) {
    std::vector<int> assign(f.num_vars, -1);
    if (!detail::dpll(f, assign)) return std::nullopt;
    std::vector<bool> phi(f.num_vars);
    for (int i = 0; i < f.num_vars; ++i) phi[i] = assign[i] == 1;
    return phi;
}

// ---------------------------------------------------------------------------
// Reduction from 3-SAT to beneficial manipulation of a sequential mechanism
// ---------------------------------------------------------------------------

// Agents: special agent "0" first, then the variable gadgets "0_i^j" and
// "1_i^j" (clause-chain agents for value 0 resp. 1 of variable i), dummies
// "d_i^j", and one "c_j" per clause. Items of type k are named "[a]_k" after
// their owner agent a; item index == owner agent index.
struct Reduction {
    CnfFormula formula;
    Instance inst;
    Profile profile;
    SequentialMechanism mech;
    int s = 0, t = 0;

    int special() const { return 0; }
    int chain(int value, int i, int j) const { return 1 + value * s * t + (i - 1) * t + (j - 1); }
    int dummy(int i, int j) const { return 1 + 2 * s * t + (i - 1) * t + (j - 1); }
    int clause_agent(int j) const { return 1 + 3 * s * t + (j - 1); }
};

namespace detail {

// A local order: the given items first (duplicates collapsed), then the
// agent's own item, then the rest ascending.
inline ItemOrder row_with_top(std::vector<int> tops, int own, int n) {
    ItemOrder row;
    auto add = [&](int item) {
        if (std::find(row.begin(), row.end(), item) == row.end()) row.push_back(item);
    };
    for (int item : tops) add(item);
    add(own);
    for (int item = 0; item < n; ++item) add(item);
    return row;
}

inline std::vector<int> importance_first(int first, int p) {
    std::vector<int> order{first};
    for (int t = 0; t < p; ++t)
        if (t != first) order.push_back(t);
    return order;
}

inline LexPref separable_pref(int p, int n, const std::vector<int>& importance) {
    LexPref pref;
    pref.importance = importance;
    pref.net.num_types = p;
    pref.net.num_items = n;
    pref.net.parents.assign(p, {});
    pref.net.cpt.assign(p, std::vector<ItemOrder>(1));
    return pref;
}

}  // namespace detail

inline Reduction reduce_sat(const CnfFormula& formula) {
    formula.validate();
    Reduction red;
    red.formula = formula;
    red.s = formula.num_vars;
    red.t = (int)formula.clauses.size();
    if (red.t < 1) throw DomainError("reduction: formula has no clauses");
    int s = red.s, t = red.t;
    int p = s + 1;                 // type index s is the tail type "s+1"
    int n = 3 * s * t + t + 1;

    // instance with the gadget names
    red.inst.num_agents = n;
    red.inst.num_types = p;
    red.inst.agent_names.resize(n);
    red.inst.agent_names[0] = "0";
    for (int value : {0, 1})
        for (int i = 1; i <= s; ++i)
            for (int j = 1; j <= t; ++j)
                red.inst.agent_names[red.chain(value, i, j)] =
                    std::to_string(value) + "_" + std::to_string(i) + "^" + std::to_string(j);
    for (int i = 1; i <= s; ++i)
        for (int j = 1; j <= t; ++j)
            red.inst.agent_names[red.dummy(i, j)] = "d_" + std::to_string(i) + "^" + std::to_string(j);
    for (int j = 1; j <= t; ++j)
        red.inst.agent_names[red.clause_agent(j)] = "c_" + std::to_string(j);
    red.inst.item_names.resize(p);
    for (int k = 0; k < p; ++k) {
        red.inst.item_names[k].reserve(n);
        for (int a = 0; a < n; ++a)
            red.inst.item_names[k].push_back("[" + red.inst.agent_names[a] + "]_" +
                                             std::to_string(k + 1));
    }
    red.inst.validate();

    // preferences
    red.profile.prefs.resize(n);

    {   // special agent 0: tail type first, [0] > [c_1] there, own item elsewhere
        LexPref pref = detail::separable_pref(p, n, detail::importance_first(p - 1, p));
        for (int k = 0; k < p - 1; ++k)
            pref.net.cpt[k][0] = detail::row_with_top({0}, 0, n);
        pref.net.cpt[p - 1][0] = detail::row_with_top({0, red.clause_agent(1)}, 0, n);
        red.profile.prefs[0] = pref;
    }

    for (int value : {0, 1}) {
        for (int i = 1; i <= s; ++i) {
            for (int j = 1; j <= t; ++j) {
                int self = red.chain(value, i, j);
                int next = red.chain(value, i, j < t ? j + 1 : 1);
                LexPref pref = detail::separable_pref(p, n, detail::importance_first(i - 1, p));
                pref.net.cpt[i - 1][0] = detail::row_with_top({next, self, 0}, self, n);
                for (int k = 0; k < p - 1; ++k)
                    if (k != i - 1) pref.net.cpt[k][0] = detail::row_with_top({self}, self, n);
                // tail type conditioned on the type-i outcome: got NEXT -> own
                // tail item, otherwise fall back to the dummy's tail item
                pref.net.parents[p - 1] = {i - 1};
                pref.net.cpt[p - 1].assign(n, {});
                for (int got = 0; got < n; ++got)
                    pref.net.cpt[p - 1][got] = detail::row_with_top(
                        {got == next ? self : red.dummy(i, j)}, self, n);
                red.profile.prefs[self] = pref;
            }
        }
    }

    for (int i = 1; i <= s; ++i) {
        for (int j = 1; j <= t; ++j) {
            int self = red.dummy(i, j);
            LexPref pref = detail::separable_pref(p, n, detail::importance_first(i - 1, p));
            for (int k = 0; k < p; ++k)
                pref.net.cpt[k][0] = detail::row_with_top({self}, self, n);
            red.profile.prefs[self] = pref;
        }
    }

    for (int j = 1; j <= t; ++j) {
        int self = red.clause_agent(j);
        LexPref pref = detail::separable_pref(p, n, detail::importance_first(p - 1, p));
        for (int k = 0; k < p - 1; ++k)
            pref.net.cpt[k][0] = detail::row_with_top({self}, self, n);
        // literals sorted by variable index; value 1 iff the literal is positive
        std::array<int, 3> clause = formula.clauses[j - 1];
        std::sort(clause.begin(), clause.end(), [](int a, int b) {
            return std::abs(a) != std::abs(b) ? std::abs(a) < std::abs(b) : a < b;
        });
        std::vector<int> tops;
        for (int lit : clause)
            tops.push_back(red.chain(lit > 0 ? 1 : 0, std::abs(lit), j));
        tops.push_back(0);   // [0]_{s+1} right after the clause's literal items
        pref.net.cpt[p - 1][0] = detail::row_with_top(tops, self, n);
        red.profile.prefs[self] = pref;
    }

    // sequential composition of serial dictatorships
    red.mech.order.resize(p);
    std::iota(red.mech.order.begin(), red.mech.order.end(), 0);
    red.mech.locals.resize(p);
    for (int i = 1; i <= s; ++i) {
        std::vector<int> priority;
        std::vector<bool> late(n, false);
        late[0] = true;
        for (int j = 1; j <= t; ++j)
            late[red.chain(0, i, j)] = late[red.chain(1, i, j)] = true;
        for (int a = 0; a < n; ++a)
            if (!late[a]) priority.push_back(a);
        priority.push_back(0);
        for (int value : {0, 1})
            for (int j = t; j >= 1; --j) priority.push_back(red.chain(value, i, j));
        red.mech.locals[i - 1] = LocalMechanism::sd(priority);
    }
    {
        std::vector<int> priority;
        for (int value : {0, 1})
            for (int i = 1; i <= s; ++i)
                for (int j = 1; j <= t; ++j) priority.push_back(red.chain(value, i, j));
        for (int j = 1; j <= t; ++j) priority.push_back(red.clause_agent(j));
        priority.push_back(0);
        for (int i = 1; i <= s; ++i)
            for (int j = 1; j <= t; ++j) priority.push_back(red.dummy(i, j));
        red.mech.locals[p - 1] = LocalMechanism::sd(priority);
    }
    return red;
}

struct ReductionCertificate {
    bool satisfiable = false;                   // independent solver verdict
    bool manipulable_optimistic = false;
    bool manipulable_pessimistic = false;
    ManipulationOutcome optimistic, pessimistic;
    std::optional<std::vector<bool>> solver_assignment;
    std::optional<std::vector<bool>> extracted_assignment;   // from the witness run
    bool consistent = false;                    // all three verdicts agree
    bool extraction_ok = false;                 // extracted assignment satisfies the formula
};

// Reads the satisfying assignment off a witness allocation: each clause agent
// ends up holding a tail-type item of a chain agent matching the assignment.
inline std::optional<std::vector<bool>> extract_assignment(const Reduction& red,
                                                           const Allocation& manipulated) {
    std::vector<int> phi(red.s, -1);
    for (int j = 1; j <= red.t; ++j) {
        int item = manipulated.bundle_of(red.clause_agent(j))[red.inst.num_types - 1];
        bool matched = false;
        for (int value : {0, 1}) {
            for (int i = 1; i <= red.s; ++i) {
                if (item == red.chain(value, i, j)) {
                    if (phi[i - 1] >= 0 && phi[i - 1] != value) return std::nullopt;
                    phi[i - 1] = value;
                    matched = true;
                }
            }
        }
        if (!matched) return std::nullopt;   // clause agent holds a non-literal item
    }
    std::vector<bool> out(red.s);
    for (int i = 0; i < red.s; ++i) out[i] = phi[i] == 1;   // unconstrained -> false
    return out;
}

inline ReductionCertificate certify_reduction(const Reduction& red, uint64_t budget = UINT64_MAX) {
    ReductionCertificate cert;
    cert.solver_assignment = solve_sat(red.formula);
    cert.satisfiable = cert.solver_assignment.has_value();

    auto misreports = top_item_misreports(red.profile.prefs[red.special()],
                                          1u << 26);
    for (ProjectionMode mode : {ProjectionMode::Optimistic, ProjectionMode::Pessimistic}) {
        // only agent 0's report varies, so other agents' projections are
        // cached across the whole scan
        auto cache = std::make_shared<ProjectionCache>();
        Mechanism mech{"reduction",
                       [&red, mode, cache](const Profile& prof) {
                           return run_sequential(red.inst, red.mech, prof, mode, nullptr,
                                                 cache.get(), red.special());
                       }};
        auto outcome = find_manipulation(mech, red.profile, {red.special()}, {misreports}, budget);
        if (mode == ProjectionMode::Optimistic) {
            cert.optimistic = outcome;
            cert.manipulable_optimistic = outcome.status == ManipulationOutcome::Status::Found;
        } else {
            cert.pessimistic = outcome;
            cert.manipulable_pessimistic = outcome.status == ManipulationOutcome::Status::Found;
        }
    }
    cert.consistent = cert.manipulable_optimistic == cert.satisfiable &&
                      cert.manipulable_pessimistic == cert.satisfiable;
    if (cert.manipulable_optimistic) {
        cert.extracted_assignment = extract_assignment(red, cert.optimistic.manipulated);
        cert.extraction_ok = cert.extracted_assignment &&
                             red.formula.satisfied_by(*cert.extracted_assignment);
    } else {
        cert.extraction_ok = !cert.satisfiable;
    }
    return cert;
}

}  // namespace mtra
