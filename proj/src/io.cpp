#include "sspomd/io.hpp"

#include <fstream>
#include <sstream>

namespace sspomd {

json mdp_to_json(const SspMdp& mdp) {
    json j;
    j["num_states"] = mdp.num_states();
    j["num_actions"] = mdp.num_actions();
    j["start_state"] = mdp.start_state();
    json tr = json::array();
    for (const auto& t : mdp.transitions())
        tr.push_back({{"s", t.s}, {"a", t.a}, {"next", t.next}, {"prob", t.prob}});
    j["transitions"] = std::move(tr);
    return j;
}

SspMdp mdp_from_json(const json& j) {
    std::vector<Transition> tr;
    for (const auto& t : j.at("transitions"))
        tr.push_back({t.at("s").get<int>(), t.at("a").get<int>(), t.at("next").get<int>(),
                      t.at("prob").get<double>()});
    SspMdp mdp(j.at("num_states").get<int>(), j.at("num_actions").get<int>(),
               j.at("start_state").get<int>(), std::move(tr));
    mdp.validate();
    return mdp;
}

json cost_to_json(const CostVector& c, int num_actions) {
    json arr = json::array();
    for (const auto& [sa, v] : c.entries())
        arr.push_back({{"s", sa / num_actions}, {"a", sa % num_actions}, {"cost", v}});
    return arr;
}

CostVector cost_from_json(const json& j, int num_actions, long episode) {
    std::vector<std::pair<int, double>> entries;
    for (const auto& e : j)
        entries.emplace_back(e.at("s").get<int>() * num_actions + e.at("a").get<int>(),
                             e.at("cost").get<double>());
    return CostVector(std::move(entries), episode);
}

std::string costs_to_jsonl(const std::vector<CostVector>& costs, int num_actions) {
    std::string out;
    for (const auto& c : costs) {
        out += cost_to_json(c, num_actions).dump();
        out += '\n';
    }
    return out;
}

std::vector<CostVector> costs_from_jsonl(const std::string& text, int num_actions) {
    std::vector<CostVector> out;
    std::istringstream in(text);
    std::string line;
    long k = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(cost_from_json(json::parse(line), num_actions, ++k));
    }
    return out;
}

json failure_instance_to_json(const FailureInstance& inst) {
    json j = mdp_to_json(inst.mdp);
    j["meta"] = {{"construction", "failure"},
                 {"N", inst.N},
                 {"claimed", {{"D", 3.0}, {"T_star", 3.0}, {"M", 3}}}};
    return j;
}

json sparse_lb_to_json(const SparseLbInstance& inst) {
    json j = mdp_to_json(inst.mdp);
    j["meta"] = {{"construction", "sparse_lb"},
                 {"B", inst.B},
                 {"N", inst.N},
                 {"L", inst.L},
                 {"D_prime", inst.D_prime},
                 {"T_prime", inst.T_prime},
                 {"bernoulli_p", inst.bern_p},
                 {"seed", inst.seed},
                 {"relaxed", inst.relaxed},
                 {"claimed", {{"D", inst.D}, {"T_star", inst.T_star}, {"M", inst.M}}}};
    return j;
}

json unknown_trans_to_json(const UnknownTransInstance& inst) {
    json j = mdp_to_json(inst.mdp);
    j["meta"] = {{"construction", "unknown_trans"},
                 {"epsilon", inst.epsilon},
                 {"D", inst.D},
                 {"seed", inst.seed},
                 {"decision_states", inst.decision_states},
                 {"a_star", inst.a_star},
                 {"claimed", {{"J_star", inst.optimal_cost_to_go()}, {"M", 1}}}};
    return j;
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw BadParam("read_file: cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace sspomd
