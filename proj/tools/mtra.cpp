// Command-line front-end: run mechanisms on fixture files, verify axiomatic
// properties over enumerated or sampled domains, build 3-SAT manipulation
// instances, decompose mechanism tables into CR-nets, and dump mechanism
// tables.

#include <cstdlib>
#include <iostream>

#include "CLI11.hpp"
#include "mtra/mtra.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNegative = 1;   // property violated / manipulation found / no decomposition
constexpr int kExitUsage = 2;

uint64_t default_budget() {
    if (const char* env = std::getenv("MTRA_BUDGET")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw mtra::ConfigError("MTRA_BUDGET must be a number");
        }
    }
    return 1u << 22;
}

mtra::ProjectionMode parse_mode(const std::string& s) {
    if (s == "conditional") return mtra::ProjectionMode::Conditional;
    if (s == "optimistic") return mtra::ProjectionMode::Optimistic;
    if (s == "pessimistic") return mtra::ProjectionMode::Pessimistic;
    throw mtra::ConfigError("unknown projection mode '" + s + "'");
}

std::vector<int> parse_order_flag(const mtra::Instance& inst, const std::string& text) {
    std::vector<int> order;
    std::string sep = text.find('>') != std::string::npos ? ">" : ",";
    for (const auto& tok : mtra::detail::split(text, sep)) {
        int t = std::stoi(tok) - 1;
        if (t < 0 || t >= inst.num_types) throw mtra::ConfigError("order: type out of range");
        order.push_back(t);
    }
    if ((int)order.size() != inst.num_types)
        throw mtra::ConfigError("order must list every type exactly once");
    return order;
}

std::vector<mtra::Property> parse_properties(const std::vector<std::string>& names, bool all) {
    const std::vector<mtra::Property> everything = {
        mtra::Property::Anonymity,          mtra::Property::TypewiseNeutrality,
        mtra::Property::NonBossiness,       mtra::Property::NonBossinessImportant,
        mtra::Property::Monotonicity,       mtra::Property::ParetoOptimality,
        mtra::Property::Strategyproofness,
    };
    if (all) return everything;
    std::vector<mtra::Property> out;
    for (const auto& name : names) {
        bool found = false;
        for (auto p : everything)
            if (name == mtra::to_string(p)) {
                out.push_back(p);
                found = true;
            }
        if (!found) throw mtra::ConfigError("unknown property '" + name + "'");
    }
    if (out.empty()) throw mtra::ConfigError("no properties requested (try --all)");
    return out;
}

void print_allocation(const mtra::Instance& inst, const mtra::Allocation& alloc,
                      const std::string& format) {
    if (format == "record") {
        mtra::write_allocation(std::cout, inst, alloc);
    } else {
        for (int j = 0; j < inst.num_agents; ++j)
            std::cout << inst.agent(j) << " -> " << mtra::format_bundle(inst, alloc.bundle_of(j))
                      << "\n";
    }
}

void print_witness(const mtra::Instance& inst, const mtra::Witness& w) {
    std::cout << "witness:\n";
    if (w.agent >= 0) std::cout << "  agent: " << inst.agent(w.agent) << "\n";
    if (w.misreport) {
        std::cout << "  misreport:\n";
        std::ostringstream buf;
        mtra::write_pref(buf, inst, w.agent, *w.misreport);
        std::istringstream lines(buf.str());
        std::string line;
        while (std::getline(lines, line)) std::cout << "    " << line << "\n";
    }
    std::cout << "  before:\n";
    for (int j = 0; j < inst.num_agents; ++j)
        std::cout << "    " << inst.agent(j) << " -> "
                  << mtra::format_bundle(inst, w.before.bundle_of(j)) << "\n";
    std::cout << "  after:\n";
    for (int j = 0; j < inst.num_agents; ++j)
        std::cout << "    " << inst.agent(j) << " -> "
                  << mtra::format_bundle(inst, w.after.bundle_of(j)) << "\n";
    if (!w.note.empty()) std::cout << "  note: " << w.note << "\n";
}

mtra::Mechanism mechanism_from_file(const mtra::Instance& inst, const mtra::ParsedMechanism& parsed,
                                    mtra::ProjectionMode mode) {
    if (parsed.conditional) {
        if (mode != mtra::ProjectionMode::Conditional)
            throw mtra::ConfigError("conditional (CR-net) mechanisms only run in conditional mode");
        return mtra::make_mechanism(inst, parsed.crnet);
    }
    return mtra::make_mechanism(inst, parsed.sequential(), mode);
}

int cmd_run(const std::string& instance_path, const std::string& profile_path,
            const std::string& mech_path, const std::string& mode_name, const std::string& format,
            bool show_rounds) {
    mtra::Instance inst = mtra::load_instance(instance_path);
    mtra::Profile prof = mtra::load_profile(profile_path, inst);
    mtra::ParsedMechanism parsed = mtra::load_mechanism(mech_path, inst);
    mtra::ProjectionMode mode = parse_mode(mode_name);

    std::vector<mtra::PartialAllocation> rounds;
    mtra::Allocation alloc;
    if (parsed.conditional) {
        if (mode != mtra::ProjectionMode::Conditional)
            throw mtra::ConfigError("conditional (CR-net) mechanisms only run in conditional mode");
        alloc = mtra::run_crnet(inst, parsed.crnet, prof, &rounds);
    } else {
        alloc = mtra::run_sequential(inst, parsed.sequential(), prof, mode, &rounds);
    }
    if (show_rounds) {
        for (size_t r = 0; r < rounds.size(); ++r) {
            int t = rounds[r].type_set().at(0);
            std::cout << "round " << (r + 1) << " (type " << (t + 1) << "): ";
            for (int j = 0; j < inst.num_agents; ++j)
                std::cout << (j ? ", " : "") << inst.agent(j) << " -> "
                          << inst.item(t, rounds[r].by_type[t][j]);
            std::cout << "\n";
        }
    }
    print_allocation(inst, alloc, format);
    return kExitOk;
}

int cmd_verify(const std::string& instance_path, int n, int p, const std::string& mech_path,
               const std::string& profile_path, const std::vector<std::string>& property_names,
               bool all, const std::string& domain_name, const std::string& mode_name,
               uint64_t samples, uint64_t seed, bool seed_set, uint64_t budget, int jobs,
               bool non_o_legal, const std::string& misreport_class_name) {
    mtra::Instance inst = instance_path.empty() ? mtra::Instance::make(n, p)
                                                : mtra::load_instance(instance_path);
    mtra::ParsedMechanism parsed = mtra::load_mechanism(mech_path, inst);
    const std::vector<int>& order = parsed.crnet.order;
    mtra::ProjectionMode mode = parse_mode(mode_name);
    mtra::Mechanism mech = mechanism_from_file(inst, parsed, mode);

    mtra::ProfileDomain dom;
    if (domain_name == "full") dom = mtra::make_full_domain(inst, order, budget);
    else if (domain_name == "separable") dom = mtra::make_separable_domain(inst, order, false, budget);
    else if (domain_name == "separable-both")
        dom = mtra::make_separable_domain(inst, order, true, budget);
    else throw mtra::ConfigError("unknown domain '" + domain_name + "'");
    if (samples > 0) {
        if (!seed_set) throw mtra::ConfigError("--samples requires --seed");
        dom.policy = mtra::ProfileDomain::Policy::Sampled;
        dom.samples = samples;
        dom.seed = seed;
    }

    auto props = parse_properties(property_names, all);

    if (!profile_path.empty()) {
        // fixture-profile mode: manipulation search from one profile
        if (props.size() != 1 || props[0] != mtra::Property::Strategyproofness)
            throw mtra::ConfigError("--profile verification supports only strategyproofness");
        mtra::Profile prof = mtra::load_profile(profile_path, inst);
        if (!non_o_legal && !mtra::is_o_legal_profile(prof, order))
            throw mtra::ConfigError("profile is not O-legal under the mechanism order "
                                    "(pass --non-o-legal to proceed with projections)");
        std::vector<int> agents(inst.num_agents);
        std::iota(agents.begin(), agents.end(), 0);
        mtra::MisreportClass cls = mtra::MisreportClass::SeparableExhaustive;
        if (misreport_class_name == "top-item-per-type") cls = mtra::MisreportClass::TopItemPerType;
        else if (misreport_class_name == "full-exhaustive") cls = mtra::MisreportClass::FullExhaustive;
        else if (misreport_class_name != "separable-exhaustive")
            throw mtra::ConfigError("unknown misreport class '" + misreport_class_name + "'");
        std::vector<std::vector<mtra::LexPref>> misreports;
        for (int j = 0; j < inst.num_agents; ++j)
            misreports.push_back(mtra::build_misreports(inst, order, prof.prefs[j], cls, budget));
        auto outcome = mtra::find_manipulation(mech, prof, agents, misreports, budget);
        std::cout << "strategyproofness: " << mtra::to_string(outcome.status) << " (tried "
                  << outcome.tried << " misreports)\n";
        if (outcome.status == mtra::ManipulationOutcome::Status::Found) {
            mtra::Witness w;
            w.agent = outcome.agent;
            w.misreport = outcome.misreport;
            w.before = outcome.truthful;
            w.after = outcome.manipulated;
            w.note = "beneficial manipulation";
            print_witness(inst, w);
            return kExitNegative;
        }
        return kExitOk;
    }

    std::cout << "domain: " << domain_name << ", " << dom.profile_count() << " profiles";
    if (dom.policy == mtra::ProfileDomain::Policy::Sampled)
        std::cout << " (sampling " << dom.samples << ", seed " << dom.seed << ")";
    std::cout << "\n";
    bool any_violation = false;
    for (auto prop : props) {
        auto report = mtra::check_property(prop, mech, dom, jobs);
        std::cout << mtra::to_string(prop) << ": " << mtra::to_string(report.verdict) << " ("
                  << report.checked << " profiles)\n";
        if (report.witness) {
            print_witness(inst, *report.witness);
            any_violation = true;
        }
    }
    return any_violation ? kExitNegative : kExitOk;
}

int cmd_reduce(const std::string& cnf_path, const std::string& out_dir, bool certify,
               uint64_t budget) {
    std::ifstream in(cnf_path);
    if (!in) throw mtra::ParseError("cannot open " + cnf_path);
    mtra::CnfFormula formula = mtra::parse_dimacs(in);
    mtra::Reduction red = mtra::reduce_sat(formula);

    std::filesystem::create_directories(out_dir);
    auto emit = [&](const std::string& name, auto&& writer) {
        std::ofstream out(std::filesystem::path(out_dir) / name);
        writer(out);
    };
    emit("instance.txt", [&](std::ostream& o) { mtra::write_instance(o, red.inst); });
    emit("profile.txt", [&](std::ostream& o) { mtra::write_profile(o, red.inst, red.profile); });
    emit("mechanism.txt", [&](std::ostream& o) { mtra::write_mechanism(o, red.inst, red.mech); });
    std::cout << "wrote instance.txt, profile.txt, mechanism.txt to " << out_dir << " ("
              << red.inst.num_agents << " agents, " << red.inst.num_types << " types)\n";

    if (!certify) return kExitOk;
    auto cert = mtra::certify_reduction(red, budget);
    std::cout << "solver: " << (cert.satisfiable ? "satisfiable" : "unsatisfiable") << "\n";
    std::cout << "manipulation (optimistic): " << mtra::to_string(cert.optimistic.status) << "\n";
    std::cout << "manipulation (pessimistic): " << mtra::to_string(cert.pessimistic.status) << "\n";
    if (cert.extracted_assignment) {
        std::cout << "extracted assignment:";
        for (int i = 0; i < red.s; ++i)
            std::cout << " x" << (i + 1) << "=" << ((*cert.extracted_assignment)[i] ? 1 : 0);
        std::cout << "\n";
    } else if (!cert.satisfiable) {
        std::cout << "no manipulation in top-item class\n";
    }
    std::cout << "certificate: " << (cert.consistent && cert.extraction_ok ? "consistent"
                                                                           : "INCONSISTENT")
              << "\n";
    if (!cert.consistent || !cert.extraction_ok) return kExitUsage;
    return cert.satisfiable ? kExitNegative : kExitOk;
}

int cmd_decompose(const std::string& instance_path, const std::string& table_path,
                  const std::string& order_text, bool try_all, const std::string& out_path,
                  uint64_t budget) {
    mtra::Instance inst = mtra::load_instance(instance_path);
    mtra::MechanismTable table = mtra::load_table(table_path, inst, budget);

    if (try_all) {
        auto results = mtra::decompose_all_orders(table);
        bool any_ok = false;
        for (auto& [order, result] : results) {
            std::cout << "order ";
            for (size_t i = 0; i < order.size(); ++i) std::cout << (i ? " > " : "") << (order[i] + 1);
            std::cout << ": " << (result.ok() ? "decomposable" : "not decomposable") << "\n";
            if (!result.ok() && result.witness)
                std::cout << "  reason: " << result.witness->reason << "\n";
            any_ok = any_ok || result.ok();
        }
        return any_ok ? kExitOk : kExitNegative;
    }

    std::vector<int> order =
        order_text.empty() ? table.order : parse_order_flag(inst, order_text);
    auto result = mtra::decompose(table, order);
    if (!result.ok()) {
        std::cout << "not decomposable\n";
        std::cout << "conflicting profiles: " << result.witness->profile_a << " and "
                  << result.witness->profile_b << "\n";
        if (result.witness->type >= 0)
            std::cout << "type: " << (result.witness->type + 1) << "\n";
        std::cout << "reason: " << result.witness->reason << "\n";
        return kExitNegative;
    }
    std::cout << "decomposable\n";
    if (!out_path.empty()) {
        // CR-nets with Table locals have no inline serialization; report the
        // structure per type instead of writing sd(...) rules we don't have.
        std::ofstream out(out_path);
        out << "# cr-net decomposition (rule tables keyed by parent allocations)\n";
        out << "order = ";
        for (size_t i = 0; i < order.size(); ++i) out << (i ? " > " : "") << (order[i] + 1);
        out << "\n";
        for (int t : order)
            out << "type " << (t + 1) << ": " << result.crnet->crt[t].size() << " rules\n";
        std::cout << "wrote summary to " << out_path << "\n";
    }
    return kExitOk;
}

int cmd_tabulate(const std::string& instance_path, int n, int p, const std::string& mech_path,
                 const std::string& domain_name, const std::string& mode_name,
                 const std::string& out_path, uint64_t budget) {
    mtra::Instance inst = instance_path.empty() ? mtra::Instance::make(n, p)
                                                : mtra::load_instance(instance_path);
    mtra::ParsedMechanism parsed = mtra::load_mechanism(mech_path, inst);
    mtra::Mechanism mech = mechanism_from_file(inst, parsed, parse_mode(mode_name));
    auto profiles = mtra::table_domain_profiles(inst, parsed.crnet.order, domain_name, budget);
    auto table = mtra::build_table(inst, parsed.crnet.order, std::move(profiles),
                                   [&](const mtra::Profile& prof) { return mech.eval(prof); });
    std::ofstream out(out_path);
    if (!out) throw mtra::ConfigError("cannot write " + out_path);
    mtra::write_table(out, table, domain_name);
    std::cout << "wrote " << table.outputs.size() << " rows to " << out_path << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-type resource allocation under lexicographic preferences"};
    app.require_subcommand(1);
    app.fallthrough();   // allow the global flags after the subcommand name

    uint64_t budget = 0;
    uint64_t seed = 0;
    bool seed_set = false;
    int jobs = 1;
    std::string mode = "conditional", format = "human";

    app.add_option("--budget", budget, "enumeration budget (default: MTRA_BUDGET or 2^22)");
    app.add_option("--seed", seed, "RNG seed for sampled verification")
        ->each([&](const std::string&) { seed_set = true; });
    app.add_option("--jobs", jobs, "worker threads for verification")->check(CLI::PositiveNumber);
    app.add_option("--mode", mode, "projection mode: conditional, optimistic, pessimistic");
    app.add_option("--format", format, "output format: human, record");

    // run
    auto* run = app.add_subcommand("run", "run a mechanism on a profile");
    std::string run_inst, run_prof, run_mech;
    bool run_rounds = false;
    run->add_option("--instance", run_inst, "instance file")->required();
    run->add_option("--profile", run_prof, "profile file")->required();
    run->add_option("--mechanism", run_mech, "mechanism file")->required();
    run->add_flag("--rounds", run_rounds, "print per-round intermediate allocations");

    // verify
    auto* verify = app.add_subcommand("verify", "check axiomatic properties over a domain");
    std::vector<std::string> verify_props;
    std::string verify_inst, verify_mech, verify_prof, verify_domain = "full";
    std::string verify_class = "separable-exhaustive";
    int verify_n = 2, verify_p = 2;
    uint64_t verify_samples = 0;
    bool verify_all = false, verify_non_o_legal = false;
    verify->add_option("properties", verify_props, "property names");
    verify->add_flag("--all", verify_all, "check every property");
    verify->add_option("--instance", verify_inst, "instance file (default: built from --n/--p)");
    verify->add_option("--n", verify_n, "agents for the default instance");
    verify->add_option("--p", verify_p, "types for the default instance");
    verify->add_option("--mech,--mechanism", verify_mech, "mechanism file")->required();
    verify->add_option("--profile", verify_prof, "single fixture profile (manipulation search)");
    verify->add_option("--domain", verify_domain, "full, separable, separable-both");
    verify->add_option("--samples", verify_samples, "sample this many profiles instead of all");
    verify->add_option("--misreports", verify_class,
                       "misreport class with --profile: separable-exhaustive, top-item-per-type, "
                       "full-exhaustive");
    verify->add_flag("--non-o-legal", verify_non_o_legal,
                     "allow a --profile fixture that is not O-legal (projection modes only)");

    // reduce
    auto* reduce = app.add_subcommand("reduce", "build a manipulation instance from a 3-CNF formula");
    std::string reduce_cnf, reduce_out = ".";
    bool reduce_certify = false;
    reduce->add_option("cnf", reduce_cnf, "DIMACS CNF file")->required();
    reduce->add_option("--out-dir", reduce_out, "output directory");
    reduce->add_flag("--certify", reduce_certify, "search for the manipulation and cross-check SAT");

    // decompose
    auto* decompose = app.add_subcommand("decompose", "decompose a mechanism table into a CR-net");
    std::string dec_inst, dec_table, dec_order, dec_out;
    bool dec_all = false;
    decompose->add_option("--instance", dec_inst, "instance file")->required();
    decompose->add_option("--table", dec_table, "mechanism table file")->required();
    decompose->add_option("--order", dec_order, "importance order, e.g. '1 > 2'");
    decompose->add_flag("--try-all-orders", dec_all, "report decomposability per importance order");
    decompose->add_option("--out", dec_out, "write a decomposition summary here");

    // tabulate
    auto* tabulate = app.add_subcommand("tabulate", "dump a mechanism as an explicit table");
    std::string tab_inst, tab_mech, tab_domain = "full", tab_out;
    int tab_n = 2, tab_p = 2;
    tabulate->add_option("--instance", tab_inst, "instance file (default: built from --n/--p)");
    tabulate->add_option("--n", tab_n, "agents for the default instance");
    tabulate->add_option("--p", tab_p, "types for the default instance");
    tabulate->add_option("--mech,--mechanism", tab_mech, "mechanism file")->required();
    tabulate->add_option("--domain", tab_domain, "full or separable");
    tabulate->add_option("--out", tab_out, "output table file")->required();

    try {
        app.parse(argc, argv);
        if (budget == 0) budget = default_budget();
        if (run->parsed())
            return cmd_run(run_inst, run_prof, run_mech, mode, format, run_rounds);
        if (verify->parsed())
            return cmd_verify(verify_inst, verify_n, verify_p, verify_mech, verify_prof,
                              verify_props, verify_all, verify_domain, mode, verify_samples, seed,
                              seed_set, budget, jobs, verify_non_o_legal, verify_class);
        if (reduce->parsed()) return cmd_reduce(reduce_cnf, reduce_out, reduce_certify, budget);
        if (decompose->parsed())
            return cmd_decompose(dec_inst, dec_table, dec_order, dec_all, dec_out, budget);
        if (tabulate->parsed())
            return cmd_tabulate(tab_inst, tab_n, tab_p, tab_mech, tab_domain, mode, tab_out, budget);
        return kExitUsage;
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    } catch (const mtra::ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const mtra::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const mtra::DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const mtra::EnumerationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitUsage;
    }
}
