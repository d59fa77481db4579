#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "sspomd/instances.hpp"

namespace sspomd {

using json = nlohmann::json;

json mdp_to_json(const SspMdp& mdp);
SspMdp mdp_from_json(const json& j);

// One episode as an array of {s, a, cost}; a stream as JSON lines.
json cost_to_json(const CostVector& c, int num_actions);
CostVector cost_from_json(const json& j, int num_actions, long episode);
std::string costs_to_jsonl(const std::vector<CostVector>& costs, int num_actions);
std::vector<CostVector> costs_from_jsonl(const std::string& text, int num_actions);

// Instance documents carry the MDP plus a meta block (construction name,
// parameters, seed, claimed quantities).
json failure_instance_to_json(const FailureInstance& inst);
json sparse_lb_to_json(const SparseLbInstance& inst);
json unknown_trans_to_json(const UnknownTransInstance& inst);

std::string read_file(const std::string& path);

} // namespace sspomd
