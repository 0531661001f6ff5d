#pragma once

#include <cstdint>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "wz/sac.hpp"

namespace wz {

// Binary checkpoint: magic, length-prefixed JSON descriptor (topology,
// squash bounds, hyperparameters, network list), then raw little-endian
// doubles per network. Round-trips are bit-stable.
inline constexpr char kCheckpointMagic[] = "WZSAC1\n";

namespace detail {

inline nlohmann::json topology_to_json(const nn::TopologyConfig& t) {
  return nlohmann::json{
      {"variant", t.variant == nn::TopologyConfig::Variant::kReducedMlp ? "reduced_mlp"
                                                                        : "impala_cnn"},
      {"obs_dim", t.obs_dim},
      {"hidden", t.hidden},
      {"grid_h", t.grid_h},
      {"grid_w", t.grid_w},
      {"speed_filters", t.speed_filters},
      {"accel_filters", t.accel_filters},
      {"embed_dim", t.embed_dim},
      {"vec_dim", t.vec_dim},
      {"head_hidden", t.head_hidden}};
}

inline nn::TopologyConfig topology_from_json(const nlohmann::json& j) {
  nn::TopologyConfig t;
  t.variant = j.at("variant") == "reduced_mlp" ? nn::TopologyConfig::Variant::kReducedMlp
                                               : nn::TopologyConfig::Variant::kImpalaCnn;
  t.obs_dim = j.at("obs_dim");
  t.hidden = j.at("hidden").get<std::vector<int>>();
  t.grid_h = j.at("grid_h");
  t.grid_w = j.at("grid_w");
  t.speed_filters = j.at("speed_filters");
  t.accel_filters = j.at("accel_filters");
  t.embed_dim = j.at("embed_dim");
  t.vec_dim = j.at("vec_dim");
  t.head_hidden = j.at("head_hidden");
  return t;
}

inline void write_net(std::ofstream& out, nn::NetBase& net) {
  nn::Vec p = net.get_params();
  out.write(reinterpret_cast<const char*>(p.data()),
            static_cast<std::streamsize>(p.size() * sizeof(double)));
}

inline void read_net(std::ifstream& in, nn::NetBase& net) {
  nn::Vec p(net.param_count());
  in.read(reinterpret_cast<char*>(p.data()),
          static_cast<std::streamsize>(p.size() * sizeof(double)));
  if (!in) throw std::runtime_error("checkpoint: truncated parameter block");
  net.set_params(p);
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, SacAgent& agent) {
  nlohmann::json header;
  header["format_version"] = 1;
  header["topology"] = detail::topology_to_json(agent.topology());
  const SquashSpec& s = agent.squash();
  header["squash"] = {{"a_min", s.a_min},
                      {"a_max", s.a_max},
                      {"log_std_min", s.log_std_min},
                      {"log_std_max", s.log_std_max}};
  const SacHyperparams& h = agent.hyper();
  header["hyper"] = {{"alpha", h.alpha},       {"gamma", h.gamma},
                     {"tau", h.tau},           {"lr_policy", h.lr_policy},
                     {"lr_q", h.lr_q},         {"lr_v", h.lr_v},
                     {"batch_size", h.batch_size}, {"buffer_capacity", h.buffer_capacity},
                     {"updates_per_step", h.updates_per_step},
                     {"learning_starts", h.learning_starts},
                     {"sgd_momentum", h.sgd_momentum}, {"adam", h.adam},
                     {"twin_q", h.twin_q},     {"init_std", h.init_std}};
  std::vector<std::string> nets{"policy", "q1"};
  if (agent.twin()) nets.push_back("q2");
  nets.push_back("v");
  nets.push_back("v_target");
  header["networks"] = nets;

  std::string head = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic) - 1);
  std::uint64_t len = head.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  detail::write_net(out, agent.policy());
  detail::write_net(out, agent.q1());
  if (agent.twin()) detail::write_net(out, agent.q2());
  detail::write_net(out, agent.v());
  detail::write_net(out, agent.v_target());
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

inline std::unique_ptr<SacAgent> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[sizeof(kCheckpointMagic) - 1];
  in.read(magic, sizeof(magic));
  if (!in || std::string(magic, sizeof(magic)) != std::string(kCheckpointMagic))
    throw std::runtime_error("checkpoint: bad magic in " + path);
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string head(len, '\0');
  in.read(head.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("checkpoint: truncated header in " + path);
  nlohmann::json header = nlohmann::json::parse(head);
  if (header.at("format_version") != 1)
    throw std::runtime_error("checkpoint: unsupported format version");

  nn::TopologyConfig topo = detail::topology_from_json(header.at("topology"));
  SquashSpec squash;
  squash.a_min = header.at("squash").at("a_min");
  squash.a_max = header.at("squash").at("a_max");
  squash.log_std_min = header.at("squash").at("log_std_min");
  squash.log_std_max = header.at("squash").at("log_std_max");
  SacHyperparams hp;
  const auto& hj = header.at("hyper");
  hp.alpha = hj.at("alpha");
  hp.gamma = hj.at("gamma");
  hp.tau = hj.at("tau");
  hp.lr_policy = hj.at("lr_policy");
  hp.lr_q = hj.at("lr_q");
  hp.lr_v = hj.at("lr_v");
  hp.batch_size = hj.at("batch_size");
  hp.buffer_capacity = hj.at("buffer_capacity");
  hp.updates_per_step = hj.at("updates_per_step");
  hp.learning_starts = hj.at("learning_starts");
  hp.sgd_momentum = hj.at("sgd_momentum");
  hp.adam = hj.at("adam");
  hp.twin_q = hj.at("twin_q");
  hp.init_std = hj.at("init_std");

  auto agent = std::make_unique<SacAgent>(topo, squash, hp, 0);
  detail::read_net(in, agent->policy());
  detail::read_net(in, agent->q1());
  if (agent->twin()) detail::read_net(in, agent->q2());
  detail::read_net(in, agent->v());
  detail::read_net(in, agent->v_target());
  return agent;
}

}  // namespace wz
