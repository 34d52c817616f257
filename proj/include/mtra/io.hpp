#pragma once

// Line-oriented text formats for instances, preference profiles, mechanisms,
// mechanism tables, and allocations.
//
// Grammar sketch (full description in docs/file-formats.md):
//   [instance]
//   agents = a, b            (or a count: agents = 2)
//   types = 2
//   items type=1 = 1_1, 2_1  (optional; defaults to k_t)
//
//   [pref agent=a]
//   importance = 1 > 2
//   cpt type=1: 1_1 > 2_1
//   cpt type=2 given 1_1: 1_2 > 2_2
//
//   [mechanism]
//   order = 1 > 2
//   local type=1 = sd(b, a)
//   local type=2 given a->1_1, b->2_1 = sd(a, b)
//
// Lines are independent; '#' starts a comment; blank lines are ignored.

#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "mtra/verify.hpp"

namespace mtra {

namespace detail {

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split(const std::string& s, const std::string& sep) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        size_t pos = s.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(trim(s.substr(start)));
            return out;
        }
        out.push_back(trim(s.substr(start, pos - start)));
        start = pos + sep.size();
    }
}

inline std::string strip_comment(const std::string& line) {
    size_t pos = line.find('#');
    return pos == std::string::npos ? line : line.substr(0, pos);
}

struct Line {
    int number = 0;
    std::string text;
};

struct Section {
    std::string name;
    std::map<std::string, std::string> attrs;
    std::vector<Line> lines;
    int number = 0;
};

[[noreturn]] inline void parse_fail(int line, const std::string& msg) {
    throw ParseError("line " + std::to_string(line) + ": " + msg);
}

inline std::vector<Section> read_sections(std::istream& in) {
    std::vector<Section> out;
    std::string raw;
    int number = 0;
    while (std::getline(in, raw)) {
        ++number;
        std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') parse_fail(number, "unterminated section header");
            Section sec;
            sec.number = number;
            std::istringstream hs(line.substr(1, line.size() - 2));
            hs >> sec.name;
            std::string attr;
            while (hs >> attr) {
                size_t eq = attr.find('=');
                if (eq == std::string::npos) parse_fail(number, "section attribute needs key=value");
                sec.attrs[attr.substr(0, eq)] = attr.substr(eq + 1);
            }
            if (sec.name.empty()) parse_fail(number, "empty section name");
            out.push_back(std::move(sec));
        } else {
            if (out.empty()) parse_fail(number, "content before the first section header");
            out.back().lines.push_back({number, line});
        }
    }
    return out;
}

// "key = value" split; returns false if the line has no top-level '='
inline bool key_value(const std::string& line, std::string& key, std::string& value) {
    size_t eq = line.find('=');
    if (eq == std::string::npos) return false;
    key = trim(line.substr(0, eq));
    value = trim(line.substr(eq + 1));
    return !key.empty() && key.find(' ') == std::string::npos;
}

inline int parse_type_ref(const Instance& inst, const std::string& token, int line) {
    try {
        size_t used = 0;
        int t = std::stoi(token, &used);
        if (used != token.size()) throw std::invalid_argument(token);
        if (t < 1 || t > inst.num_types) parse_fail(line, "type " + token + " out of range");
        return t - 1;
    } catch (const ParseError&) {
        throw;
    } catch (const std::exception&) {
        parse_fail(line, "expected a 1-based type number, got '" + token + "'");
    }
}

inline int parse_agent_ref(const Instance& inst, const std::string& token, int line) {
    int j = inst.agent_index(token);
    if (j < 0) parse_fail(line, "unknown agent '" + token + "'");
    return j;
}

inline int parse_item_ref(const Instance& inst, int type, const std::string& token, int line) {
    int k = inst.item_index(type, token);
    if (k < 0)
        parse_fail(line, "unknown item '" + token + "' in type " + std::to_string(type + 1));
    return k;
}

// Resolve an item name without knowing its type; must be unambiguous.
inline std::pair<int, int> find_item(const Instance& inst, const std::string& token, int line) {
    int found_t = -1, found_k = -1;
    for (int t = 0; t < inst.num_types; ++t) {
        int k = inst.item_index(t, token);
        if (k >= 0) {
            if (found_t >= 0) parse_fail(line, "item name '" + token + "' is ambiguous across types");
            found_t = t;
            found_k = k;
        }
    }
    if (found_t < 0) parse_fail(line, "unknown item '" + token + "'");
    return {found_t, found_k};
}

inline std::vector<int> parse_type_list(const Instance& inst, const std::string& text,
                                        const std::string& sep, int line) {
    std::vector<int> out;
    for (const auto& tok : split(text, sep)) out.push_back(parse_type_ref(inst, tok, line));
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Instance
// ---------------------------------------------------------------------------

inline Instance parse_instance(std::istream& in) {
    auto sections = detail::read_sections(in);
    const detail::Section* sec = nullptr;
    for (const auto& s : sections)
        if (s.name == "instance") {
            if (sec) detail::parse_fail(s.number, "duplicate [instance] section");
            sec = &s;
        }
    if (!sec) throw ParseError("missing [instance] section");

    Instance inst;
    std::map<int, std::vector<std::string>> items;
    std::string agents_value;
    for (const auto& line : sec->lines) {
        if (line.text.rfind("items", 0) == 0) {
            size_t tp = line.text.find("type=");
            if (tp == std::string::npos)
                detail::parse_fail(line.number, "items line needs type=<t>");
            size_t eq = line.text.find('=', tp + 5);
            if (eq == std::string::npos)
                detail::parse_fail(line.number, "items line needs an item list");
            std::string tnum = detail::trim(line.text.substr(tp + 5, eq - tp - 5));
            std::string list = detail::trim(line.text.substr(eq + 1));
            int t;
            try {
                t = std::stoi(tnum);
            } catch (const std::exception&) {
                detail::parse_fail(line.number, "bad type number '" + tnum + "'");
            }
            items[t - 1] = detail::split(list, ",");
            continue;
        }
        std::string key, value;
        if (!detail::key_value(line.text, key, value))
            detail::parse_fail(line.number, "expected key = value");
        if (key == "agents") {
            agents_value = value;
        } else if (key == "types") {
            try {
                inst.num_types = std::stoi(value);
            } catch (const std::exception&) {
                detail::parse_fail(line.number, "types must be a number");
            }
        } else {
            detail::parse_fail(line.number, "unknown instance key '" + key + "'");
        }
    }
    if (agents_value.empty()) throw ParseError("[instance]: missing agents");
    if (inst.num_types < 1) throw ParseError("[instance]: missing or bad types");

    if (agents_value.find(',') != std::string::npos) {
        inst.agent_names = detail::split(agents_value, ",");
        inst.num_agents = (int)inst.agent_names.size();
    } else {
        bool numeric = !agents_value.empty() &&
                       agents_value.find_first_not_of("0123456789") == std::string::npos;
        if (numeric) {
            inst.num_agents = std::stoi(agents_value);
            for (int j = 0; j < inst.num_agents; ++j)
                inst.agent_names.push_back(std::to_string(j + 1));
        } else {
            inst.agent_names = {agents_value};
            inst.num_agents = 1;
        }
    }
    inst.item_names.resize(inst.num_types);
    for (int t = 0; t < inst.num_types; ++t) {
        auto it = items.find(t);
        if (it != items.end()) {
            inst.item_names[t] = it->second;
        } else {
            for (int k = 0; k < inst.num_agents; ++k)
                inst.item_names[t].push_back(std::to_string(k + 1) + "_" + std::to_string(t + 1));
        }
    }
    inst.validate();
    return inst;
}

inline void write_instance(std::ostream& out, const Instance& inst) {
    out << "[instance]\n";
    out << "agents = ";
    for (int j = 0; j < inst.num_agents; ++j) out << (j ? ", " : "") << inst.agent(j);
    out << "\ntypes = " << inst.num_types << "\n";
    for (int t = 0; t < inst.num_types; ++t) {
        out << "items type=" << (t + 1) << " = ";
        for (int k = 0; k < inst.num_agents; ++k) out << (k ? ", " : "") << inst.item(t, k);
        out << "\n";
    }
}

// ---------------------------------------------------------------------------
// Profiles
// ---------------------------------------------------------------------------

namespace detail {

inline ItemOrder parse_item_order(const Instance& inst, int type, const std::string& text, int line) {
    ItemOrder row;
    for (const auto& tok : split(text, ">")) row.push_back(parse_item_ref(inst, type, tok, line));
    if (!is_item_permutation(row, inst.num_agents))
        parse_fail(line, "order must list each item of the type exactly once");
    return row;
}

}  // namespace detail

inline LexPref parse_pref_section(const Instance& inst, const detail::Section& sec) {
    int n = inst.num_agents, p = inst.num_types;
    LexPref pref;
    pref.net.num_types = p;
    pref.net.num_items = n;
    pref.net.parents.assign(p, {});
    pref.net.cpt.assign(p, {});

    struct Row {
        int line;
        std::vector<std::pair<int, int>> given;   // (type, item)
        ItemOrder order;
    };
    std::map<int, std::vector<Row>> rows;

    for (const auto& line : sec.lines) {
        if (line.text.rfind("importance", 0) == 0) {
            std::string key, value;
            if (!detail::key_value(line.text, key, value) || key != "importance")
                detail::parse_fail(line.number, "expected importance = t1 > t2 > ...");
            pref.importance = detail::parse_type_list(inst, value, ">", line.number);
            continue;
        }
        if (line.text.rfind("cpt", 0) == 0) {
            size_t tp = line.text.find("type=");
            size_t colon = line.text.find(':');
            if (tp == std::string::npos || colon == std::string::npos)
                detail::parse_fail(line.number, "expected cpt type=<t> [given <items>]: order");
            std::string head = detail::trim(line.text.substr(tp + 5, colon - tp - 5));
            Row row;
            row.line = line.number;
            std::string tnum = head;
            size_t gv = head.find("given");
            if (gv != std::string::npos) {
                tnum = detail::trim(head.substr(0, gv));
                for (const auto& tok : detail::split(head.substr(gv + 5), ","))
                    row.given.push_back(detail::find_item(inst, tok, line.number));
            }
            int type = detail::parse_type_ref(inst, tnum, line.number);
            row.order =
                detail::parse_item_order(inst, type, line.text.substr(colon + 1), line.number);
            rows[type].push_back(std::move(row));
            continue;
        }
        detail::parse_fail(line.number, "unknown preference line");
    }

    if (pref.importance.empty()) {
        if (p == 1) pref.importance = {0};
        else detail::parse_fail(sec.number, "preference section missing importance order");
    }

    for (int t = 0; t < p; ++t) {
        auto it = rows.find(t);
        if (it == rows.end())
            detail::parse_fail(sec.number, "no cpt rows for type " + std::to_string(t + 1));
        // parents from the first row; all rows must agree
        std::vector<int> parents;
        for (auto& [pt, pk] : it->second.front().given) parents.push_back(pt);
        std::sort(parents.begin(), parents.end());
        if (std::adjacent_find(parents.begin(), parents.end()) != parents.end())
            detail::parse_fail(it->second.front().line, "duplicate parent type in given clause");
        pref.net.parents[t] = parents;
        int keys = detail::pow_int(n, (int)parents.size());
        pref.net.cpt[t].assign(keys, {});
        for (const auto& row : it->second) {
            std::vector<int> items(p, -1);
            for (auto& [pt, pk] : row.given) {
                if (std::find(parents.begin(), parents.end(), pt) == parents.end())
                    detail::parse_fail(row.line, "given clause does not match the type's parents");
                if (items[pt] >= 0) detail::parse_fail(row.line, "duplicate given item type");
                items[pt] = pk;
            }
            if ((int)row.given.size() != (int)parents.size())
                detail::parse_fail(row.line, "given clause does not cover all parents");
            int key = pref.net.row_key(t, items);
            if (!pref.net.cpt[t][key].empty())
                detail::parse_fail(row.line, "duplicate cpt row for the same condition");
            pref.net.cpt[t][key] = row.order;
        }
        for (int key = 0; key < keys; ++key)
            if (pref.net.cpt[t][key].empty())
                detail::parse_fail(sec.number, "type " + std::to_string(t + 1) +
                                                   ": cpt rows do not cover all parent assignments");
    }

    auto check = validate_o_legal(pref);
    if (!check.ok) detail::parse_fail(sec.number, check.diagnostic);
    return pref;
}

inline Profile parse_profile(std::istream& in, const Instance& inst) {
    auto sections = detail::read_sections(in);
    Profile prof;
    prof.prefs.resize(inst.num_agents);
    std::vector<bool> seen(inst.num_agents, false);
    for (const auto& sec : sections) {
        if (sec.name != "pref") detail::parse_fail(sec.number, "expected [pref agent=...] sections");
        auto it = sec.attrs.find("agent");
        if (it == sec.attrs.end()) detail::parse_fail(sec.number, "pref section needs agent=<name>");
        int j = detail::parse_agent_ref(inst, it->second, sec.number);
        if (seen[j]) detail::parse_fail(sec.number, "duplicate preference for agent " + it->second);
        seen[j] = true;
        prof.prefs[j] = parse_pref_section(inst, sec);
    }
    for (int j = 0; j < inst.num_agents; ++j)
        if (!seen[j]) throw ParseError("profile: missing preference for agent " + inst.agent(j));
    return prof;
}

inline void write_pref(std::ostream& out, const Instance& inst, int agent, const LexPref& pref) {
    out << "[pref agent=" << inst.agent(agent) << "]\n";
    out << "importance = ";
    for (size_t i = 0; i < pref.importance.size(); ++i)
        out << (i ? " > " : "") << (pref.importance[i] + 1);
    out << "\n";
    int n = inst.num_agents;
    for (int t : pref.importance) {
        const auto& parents = pref.net.parents[t];
        int keys = (int)pref.net.cpt[t].size();
        for (int key = 0; key < keys; ++key) {
            out << "cpt type=" << (t + 1);
            if (!parents.empty()) {
                out << " given ";
                int k = key;
                for (size_t i = 0; i < parents.size(); ++i) {
                    out << (i ? ", " : "") << inst.item(parents[i], k % n);
                    k /= n;
                }
            }
            out << ": ";
            const auto& row = pref.net.cpt[t][key];
            for (size_t i = 0; i < row.size(); ++i)
                out << (i ? " > " : "") << inst.item(t, row[i]);
            out << "\n";
        }
    }
}

inline void write_profile(std::ostream& out, const Instance& inst, const Profile& prof) {
    for (int j = 0; j < inst.num_agents; ++j) {
        if (j) out << "\n";
        write_pref(out, inst, j, prof.prefs[j]);
    }
}

// ---------------------------------------------------------------------------
// Mechanisms
// ---------------------------------------------------------------------------

// Parsed form: a CR-net; an unconditional file (no `given` clauses) is a plain
// sequential composition, also exposed as such.
struct ParsedMechanism {
    bool conditional = false;   // any rule had a given clause
    CRNetMechanism crnet;

    SequentialMechanism sequential() const {
        if (conditional)
            throw ConfigError("mechanism has conditional rules; not a plain sequential composition");
        SequentialMechanism seq;
        seq.order = crnet.order;
        seq.locals.resize(crnet.crt.size());
        for (size_t t = 0; t < crnet.crt.size(); ++t)
            seq.locals[t] = crnet.crt[t].begin()->second;
        return seq;
    }
};

namespace detail {

inline LocalMechanism parse_local_rhs(const Instance& inst, const std::string& rhs, int line,
                                      const std::filesystem::path& base_dir);

inline LocalMechanism parse_local_table_file(const Instance& inst, const std::filesystem::path& path);

}  // namespace detail

inline ParsedMechanism parse_mechanism(std::istream& in, const Instance& inst,
                                       const std::filesystem::path& base_dir = ".") {
    auto sections = detail::read_sections(in);
    const detail::Section* sec = nullptr;
    for (const auto& s : sections)
        if (s.name == "mechanism") {
            if (sec) detail::parse_fail(s.number, "duplicate [mechanism] section");
            sec = &s;
        }
    if (!sec) throw ParseError("missing [mechanism] section");

    int p = inst.num_types, n = inst.num_agents;
    ParsedMechanism out;
    out.crnet.parents.assign(p, {});
    out.crnet.crt.assign(p, {});
    struct Rule {
        int line;
        std::vector<std::pair<int, std::vector<int>>> cond;   // (type, agent->item)
        LocalMechanism local;
    };
    std::map<int, std::vector<Rule>> rules;

    for (const auto& line : sec->lines) {
        if (line.text.rfind("order", 0) == 0) {
            std::string key, value;
            if (!detail::key_value(line.text, key, value) || key != "order")
                detail::parse_fail(line.number, "expected order = t1 > t2 > ...");
            out.crnet.order = detail::parse_type_list(inst, value, ">", line.number);
            continue;
        }
        if (line.text.rfind("local", 0) == 0) {
            size_t eq = line.text.find(" = ");
            if (eq == std::string::npos)
                detail::parse_fail(line.number, "expected local type=<t> [given ...] = sd(...)");
            std::string head = detail::trim(line.text.substr(5, eq - 5));
            std::string rhs = detail::trim(line.text.substr(eq + 3));
            size_t tp = head.find("type=");
            if (tp != 0) detail::parse_fail(line.number, "local line needs type=<t>");
            Rule rule;
            rule.line = line.number;
            std::string tnum = detail::trim(head.substr(5));
            size_t gv = tnum.find("given");
            std::string cond_text;
            if (gv != std::string::npos) {
                cond_text = detail::trim(tnum.substr(gv + 5));
                tnum = detail::trim(tnum.substr(0, gv));
            }
            int type = detail::parse_type_ref(inst, tnum, line.number);
            if (!cond_text.empty()) {
                // "a->1_1, b->2_1": full allocation of each referenced type
                std::map<int, std::vector<int>> per_type;
                for (const auto& tok : detail::split(cond_text, ",")) {
                    size_t ar = tok.find("->");
                    if (ar == std::string::npos)
                        detail::parse_fail(line.number, "given clause entries look like agent->item");
                    int j = detail::parse_agent_ref(inst, detail::trim(tok.substr(0, ar)), line.number);
                    auto [t2, k] = detail::find_item(inst, detail::trim(tok.substr(ar + 2)), line.number);
                    auto& vec = per_type[t2];
                    vec.resize(n, -1);
                    if (vec[j] >= 0) detail::parse_fail(line.number, "duplicate assignment for an agent");
                    vec[j] = k;
                }
                for (auto& [t2, vec] : per_type) {
                    for (int v : vec)
                        if (v < 0)
                            detail::parse_fail(line.number, "given clause must allocate every agent in type " +
                                                                std::to_string(t2 + 1));
                    rule.cond.emplace_back(t2, vec);
                }
            }
            rule.local = detail::parse_local_rhs(inst, rhs, line.number, base_dir);
            rules[type].push_back(std::move(rule));
            continue;
        }
        detail::parse_fail(line.number, "unknown mechanism line");
    }

    if ((int)out.crnet.order.size() != p)
        throw ParseError("[mechanism]: order must list every type exactly once");
    for (int t = 0; t < p; ++t) {
        auto it = rules.find(t);
        if (it == rules.end())
            throw ParseError("[mechanism]: no local rule for type " + std::to_string(t + 1));
        std::vector<int> parents;
        for (auto& [pt, vec] : it->second.front().cond) parents.push_back(pt);
        std::sort(parents.begin(), parents.end());
        out.crnet.parents[t] = parents;
        if (!parents.empty()) out.conditional = true;
        for (const auto& rule : it->second) {
            std::vector<int> key_parents;
            PartialAllocation cond = PartialAllocation::none(p);
            for (auto& [pt, vec] : rule.cond) {
                key_parents.push_back(pt);
                cond.by_type[pt] = vec;
            }
            std::sort(key_parents.begin(), key_parents.end());
            if (key_parents != parents)
                detail::parse_fail(rule.line, "given clauses for one type must share the same parent types");
            auto key = out.crnet.crt_key(t, cond);
            if (!out.crnet.crt[t].emplace(key, rule.local).second)
                detail::parse_fail(rule.line, "duplicate rule for the same parent allocation");
        }
    }
    return out;
}

namespace detail {

inline LocalMechanism parse_local_rhs(const Instance& inst, const std::string& rhs, int line,
                                      const std::filesystem::path& base_dir) {
    if (rhs.rfind("sd(", 0) == 0 && rhs.back() == ')') {
        std::vector<int> priority;
        for (const auto& tok : split(rhs.substr(3, rhs.size() - 4), ","))
            priority.push_back(parse_agent_ref(inst, tok, line));
        if ((int)priority.size() != inst.num_agents)
            parse_fail(line, "sd(...) must list every agent exactly once");
        std::vector<int> sorted = priority;
        std::sort(sorted.begin(), sorted.end());
        for (int j = 0; j < inst.num_agents; ++j)
            if (sorted[j] != j) parse_fail(line, "sd(...) must list every agent exactly once");
        return LocalMechanism::sd(priority);
    }
    if (rhs.rfind("table(", 0) == 0 && rhs.back() == ')') {
        std::filesystem::path path = trim(rhs.substr(6, rhs.size() - 7));
        if (path.is_relative()) path = base_dir / path;
        return parse_local_table_file(inst, path);
    }
    parse_fail(line, "local rule must be sd(...) or table(<path>)");
}

// Local table file: one [local-table] section, rows of the form
//   row 1_1>2_1 ; 2_1>1_1 -> 2_1, 1_1
// with one local order per agent (canonical agent order) before '->' and one
// assigned item per agent after it.
inline LocalMechanism parse_local_table_file(const Instance& inst, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open local table file " + path.string());
    auto sections = read_sections(in);
    if (sections.size() != 1 || sections[0].name != "local-table")
        throw ParseError(path.string() + ": expected a single [local-table] section");
    const auto& sec = sections[0];
    auto it = sec.attrs.find("type");
    if (it == sec.attrs.end()) parse_fail(sec.number, "local-table section needs type=<t>");
    int type = parse_type_ref(inst, it->second, sec.number);
    int n = inst.num_agents;
    std::map<LocalProfile, std::vector<int>> table;
    for (const auto& line : sec.lines) {
        if (line.text.rfind("row", 0) != 0) parse_fail(line.number, "expected row lines");
        std::string body = trim(line.text.substr(3));
        size_t ar = body.find("->");
        if (ar == std::string::npos) parse_fail(line.number, "row needs '->'");
        LocalProfile lp;
        for (const auto& tok : split(body.substr(0, ar), ";"))
            lp.push_back(parse_item_order(inst, type, tok, line.number));
        if ((int)lp.size() != n) parse_fail(line.number, "row must list one order per agent");
        std::vector<int> assign;
        for (const auto& tok : split(body.substr(ar + 2), ","))
            assign.push_back(parse_item_ref(inst, type, tok, line.number));
        if (!is_item_permutation(assign, n))
            parse_fail(line.number, "row assignment must give each agent a distinct item");
        if (!table.emplace(std::move(lp), std::move(assign)).second)
            parse_fail(line.number, "duplicate row for the same local profile");
    }
    return LocalMechanism::from_table(std::move(table));
}

}  // namespace detail

inline void write_mechanism(std::ostream& out, const Instance& inst, const CRNetMechanism& mech) {
    out << "[mechanism]\n";
    out << "order = ";
    for (size_t i = 0; i < mech.order.size(); ++i)
        out << (i ? " > " : "") << (mech.order[i] + 1);
    out << "\n";
    int n = inst.num_agents;
    for (int t : mech.order) {
        // reconstruct each rule's condition from its key
        for (const auto& [key, local] : mech.crt[t]) {
            out << "local type=" << (t + 1);
            if (!mech.parents[t].empty()) {
                out << " given ";
                bool first = true;
                size_t pos = 0;
                for (int par : mech.parents[t]) {
                    for (int j = 0; j < n; ++j, ++pos) {
                        out << (first ? "" : ", ") << inst.agent(j) << "->"
                            << inst.item(par, key.at(pos));
                        first = false;
                    }
                }
            }
            out << " = ";
            if (local.kind == LocalMechanism::Kind::SerialDictatorship) {
                out << "sd(";
                for (size_t i = 0; i < local.priority.size(); ++i)
                    out << (i ? ", " : "") << inst.agent(local.priority[i]);
                out << ")";
            } else {
                throw ConfigError("cannot serialize table locals inline; write a local-table file");
            }
            out << "\n";
        }
    }
}

inline void write_mechanism(std::ostream& out, const Instance& inst, const SequentialMechanism& mech) {
    write_mechanism(out, inst, to_crnet(inst, mech));
}

// ---------------------------------------------------------------------------
// Allocations (record format round-trips)
// ---------------------------------------------------------------------------

inline std::string format_bundle(const Instance& inst, const Bundle& b) {
    std::string out = "(";
    for (int t = 0; t < inst.num_types; ++t) {
        if (t) out += ", ";
        out += inst.item(t, b[t]);
    }
    return out + ")";
}

inline void write_allocation(std::ostream& out, const Instance& inst, const Allocation& alloc) {
    out << "[allocation]\n";
    for (int j = 0; j < inst.num_agents; ++j)
        out << inst.agent(j) << " -> " << format_bundle(inst, alloc.bundle_of(j)) << "\n";
}

inline Allocation parse_allocation(std::istream& in, const Instance& inst) {
    auto sections = detail::read_sections(in);
    if (sections.size() != 1 || sections[0].name != "allocation")
        throw ParseError("expected a single [allocation] section");
    Allocation alloc;
    alloc.by_type.assign(inst.num_types, std::vector<int>(inst.num_agents, -1));
    std::vector<bool> seen(inst.num_agents, false);
    for (const auto& line : sections[0].lines) {
        size_t ar = line.text.find("->");
        if (ar == std::string::npos) detail::parse_fail(line.number, "expected agent -> (items)");
        int j = detail::parse_agent_ref(inst, detail::trim(line.text.substr(0, ar)), line.number);
        if (seen[j]) detail::parse_fail(line.number, "duplicate bundle for agent " + inst.agent(j));
        seen[j] = true;
        std::string rest = detail::trim(line.text.substr(ar + 2));
        if (rest.size() < 2 || rest.front() != '(' || rest.back() != ')')
            detail::parse_fail(line.number, "bundle must be parenthesized");
        auto toks = detail::split(rest.substr(1, rest.size() - 2), ",");
        if ((int)toks.size() != inst.num_types)
            detail::parse_fail(line.number, "bundle must list one item per type");
        for (int t = 0; t < inst.num_types; ++t)
            alloc.by_type[t][j] = detail::parse_item_ref(inst, t, toks[t], line.number);
    }
    for (int j = 0; j < inst.num_agents; ++j)
        if (!seen[j]) throw ParseError("allocation: missing bundle for agent " + inst.agent(j));
    alloc.validate(inst);
    return alloc;
}

// ---------------------------------------------------------------------------
// Mechanism tables
// ---------------------------------------------------------------------------

// Table files reference profiles by canonical enumeration index within a
// declared domain, so the file stays compact:
//   [table]
//   order = 1 > 2
//   domain = full            # or: separable, separable-both
//   row 0: a -> (1_1, 1_2), b -> (2_1, 2_2)
//   ...
inline std::vector<Profile> table_domain_profiles(const Instance& inst, const std::vector<int>& order,
                                                  const std::string& domain,
                                                  uint64_t budget = 1u << 22) {
    ProfileDomain dom;
    // tables are keyed within one order's lexicographic domain, so mixed
    // importance orders are not a valid table domain
    if (domain == "full") dom = make_full_domain(inst, order, budget);
    else if (domain == "separable") dom = make_separable_domain(inst, order, false, budget);
    else throw ParseError("unknown table domain '" + domain + "'");
    std::vector<Profile> profiles;
    uint64_t count = dom.profile_count();
    profiles.reserve(count);
    for (uint64_t i = 0; i < count; ++i) profiles.push_back(dom.profile_at(i));
    return profiles;
}

inline MechanismTable parse_table(std::istream& in, const Instance& inst, uint64_t budget = 1u << 22) {
    auto sections = detail::read_sections(in);
    if (sections.size() != 1 || sections[0].name != "table")
        throw ParseError("expected a single [table] section");
    const auto& sec = sections[0];
    MechanismTable table;
    table.inst = inst;
    std::string domain = "full";
    std::vector<std::pair<uint64_t, Allocation>> rows;
    for (const auto& line : sec.lines) {
        std::string key, value;
        if (line.text.rfind("row", 0) == 0) {
            size_t colon = line.text.find(':');
            if (colon == std::string::npos) detail::parse_fail(line.number, "row needs ':'");
            uint64_t idx;
            try {
                idx = std::stoull(detail::trim(line.text.substr(3, colon - 3)));
            } catch (const std::exception&) {
                detail::parse_fail(line.number, "bad row index");
            }
            std::istringstream body("[allocation]\n" +
                                    [&] {
                                        std::string s;
                                        for (const auto& tok :
                                             detail::split(line.text.substr(colon + 1), "),"))
                                            s += tok + (tok.back() == ')' ? "\n" : ")\n");
                                        return s;
                                    }());
            rows.emplace_back(idx, parse_allocation(body, inst));
        } else if (detail::key_value(line.text, key, value)) {
            if (key == "order") table.order = detail::parse_type_list(inst, value, ">", line.number);
            else if (key == "domain") domain = value;
            else detail::parse_fail(line.number, "unknown table key '" + key + "'");
        } else {
            detail::parse_fail(line.number, "unknown table line");
        }
    }
    if ((int)table.order.size() != inst.num_types)
        throw ParseError("[table]: order must list every type exactly once");
    table.profiles = table_domain_profiles(inst, table.order, domain, budget);
    table.outputs.resize(table.profiles.size());
    std::vector<bool> filled(table.profiles.size(), false);
    for (auto& [idx, alloc] : rows) {
        if (idx >= table.profiles.size()) throw ParseError("table row index out of range");
        if (filled[idx]) throw ParseError("duplicate table row " + std::to_string(idx));
        filled[idx] = true;
        table.outputs[idx] = std::move(alloc);
    }
    for (size_t i = 0; i < filled.size(); ++i)
        if (!filled[i])
            throw ParseError("table is missing row " + std::to_string(i) + " of " +
                             std::to_string(filled.size()));
    table.reindex();
    return table;
}

inline void write_table(std::ostream& out, const MechanismTable& table, const std::string& domain) {
    out << "[table]\n";
    out << "order = ";
    for (size_t i = 0; i < table.order.size(); ++i)
        out << (i ? " > " : "") << (table.order[i] + 1);
    out << "\ndomain = " << domain << "\n";
    for (size_t i = 0; i < table.outputs.size(); ++i) {
        out << "row " << i << ": ";
        for (int j = 0; j < table.inst.num_agents; ++j) {
            if (j) out << ", ";
            out << table.inst.agent(j) << " -> "
                << format_bundle(table.inst, table.outputs[i].bundle_of(j));
        }
        out << "\n";
    }
}

// convenience file wrappers

template <class T, class Parser>
T parse_file(const std::filesystem::path& path, Parser&& parser) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    try {
        return parser(in);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

inline Instance load_instance(const std::filesystem::path& path) {
    return parse_file<Instance>(path, [](std::istream& in) { return parse_instance(in); });
}
inline Profile load_profile(const std::filesystem::path& path, const Instance& inst) {
    return parse_file<Profile>(path, [&](std::istream& in) { return parse_profile(in, inst); });
}
inline ParsedMechanism load_mechanism(const std::filesystem::path& path, const Instance& inst) {
    return parse_file<ParsedMechanism>(path, [&](std::istream& in) {
        return parse_mechanism(in, inst, path.parent_path().empty() ? "." : path.parent_path());
    });
}
inline MechanismTable load_table(const std::filesystem::path& path, const Instance& inst,
                                 uint64_t budget = 1u << 22) {
    return parse_file<MechanismTable>(path,
                                      [&](std::istream& in) { return parse_table(in, inst, budget); });
}

}  // namespace mtra
