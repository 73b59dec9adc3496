#include "followrl/dataset.hpp"

#include "followrl/csv.hpp"
#include "followrl/reward.hpp"

#include <glob.h>

#include "json.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

namespace followrl {

namespace {

constexpr std::array<char, 8> kStoreMagic = {'F', 'R', 'L', 'T', 'R', 'N', '0', '1'};

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ValidationError("truncated transition store " + path.string());
  return v;
}

void put_obs(std::ostream& out, const Observation& o) {
  for (double x : o.to_array()) put(out, x);
}

Observation get_obs(std::istream& in, const std::filesystem::path& path) {
  std::array<double, 4> a{};
  for (auto& x : a) x = get<double>(in, path);
  return Observation::from_array(a);
}

RelabeledDataset subset(const RelabeledDataset& data, const std::vector<bool>& keep) {
  RelabeledDataset out;
  out.episode_ids = data.episode_ids;
  for (std::size_t i = 0; i < data.transitions.size(); ++i) {
    if (!keep[i]) continue;
    out.transitions.push_back(data.transitions[i]);
    out.episode_of.push_back(data.episode_of[i]);
  }
  out.histogram = reward_histogram(out);
  return out;
}

}  // namespace

const char* to_string(EpisodeSource source) {
  switch (source) {
    case EpisodeSource::Napoli:
      return "napoli";
    case EpisodeSource::Ngsim:
      return "ngsim";
    case EpisodeSource::Synthetic:
      return "synthetic";
  }
  return "synthetic";
}

EpisodeSource parse_source(const std::string& name) {
  if (name == "napoli") return EpisodeSource::Napoli;
  if (name == "ngsim") return EpisodeSource::Ngsim;
  if (name == "synthetic") return EpisodeSource::Synthetic;
  throw ValidationError("unknown dataset source '" + name + "'");
}

FollowingEpisode parse_trajectory_csv(const std::filesystem::path& path, double expected_dt,
                                      EpisodeSource source) {
  const auto table = csv::read(path);
  csv::expect_header(table, {"t_s", "v_leader_mps", "v_follower_mps", "gap_m"}, path);
  FollowingEpisode ep;
  ep.id = path.stem().string();
  ep.source = source;
  auto fail = [&](std::size_t line, const std::string& what) {
    throw ValidationError(path.string() + ":" + std::to_string(line) + ": " + what);
  };
  for (const auto& row : table.rows) {
    TrajectoryRecord r{csv::parse_double(row.cells[0], row.line, path),
                       csv::parse_double(row.cells[1], row.line, path),
                       csv::parse_double(row.cells[2], row.line, path),
                       csv::parse_double(row.cells[3], row.line, path)};
    if (r.v_leader < 0 || r.v_follower < 0) fail(row.line, "negative speed");
    if (r.gap < 0) fail(row.line, "negative gap");
    if (!ep.records.empty()) {
      const double step = r.t - ep.records.back().t;
      if (std::abs(step - expected_dt) > 1e-6) {
        fail(row.line, "time step " + csv::format(step) + " s differs from expected " +
                           csv::format(expected_dt) + " s");
      }
    }
    ep.records.push_back(r);
  }
  if (ep.records.size() < 2) throw ValidationError(path.string() + ": need at least 2 rows");
  return ep;
}

void write_trajectory_csv(const std::filesystem::path& path, const FollowingEpisode& episode) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "t_s,v_leader_mps,v_follower_mps,gap_m\n";
  for (const auto& r : episode.records) {
    out << csv::format(r.t) << ',' << csv::format(r.v_leader) << ',' << csv::format(r.v_follower) << ','
        << csv::format(r.gap) << '\n';
  }
}

std::size_t RewardHistogram::bin_of(double r) {
  const double pos = std::floor((r - kLow) / kWidth);
  return std::min(kBins - 1, static_cast<std::size_t>(std::max(0.0, pos)));
}

std::size_t RewardHistogram::mass() const {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0}) + underflow + overflow;
}

RewardHistogram reward_histogram(const RelabeledDataset& data) {
  RewardHistogram h;
  std::size_t good = 0;
  std::size_t zero = 0;
  for (const auto& t : data.transitions) {
    const double r = t.reward;
    if (r < RewardHistogram::kLow) {
      ++h.underflow;
    } else if (r > RewardHistogram::kHigh) {
      ++h.overflow;
    } else {
      ++h.counts[RewardHistogram::bin_of(r)];
    }
    if (r >= 0.4) ++good;
    if (std::abs(r) <= 1e-9) ++zero;
  }
  h.total = data.transitions.size();
  if (h.total > 0) {
    h.fraction_good = static_cast<double>(good) / static_cast<double>(h.total);
    h.fraction_zero = static_cast<double>(zero) / static_cast<double>(h.total);
  }
  return h;
}

void RelabeledDataset::append(const RelabeledDataset& other) {
  const auto offset = static_cast<std::uint32_t>(episode_ids.size());
  episode_ids.insert(episode_ids.end(), other.episode_ids.begin(), other.episode_ids.end());
  transitions.insert(transitions.end(), other.transitions.begin(), other.transitions.end());
  for (auto e : other.episode_of) episode_of.push_back(e + offset);
  clipped_actions += other.clipped_actions;
  histogram = reward_histogram(*this);
}

RelabeledDataset build_transitions(const FollowingEpisode& episode, const SimConfig& cfg,
                                   const RewardConfig& reward_cfg) {
  const auto& rec = episode.records;
  if (rec.size() < 3) throw ValidationError("build_transitions: episode " + episode.id + " needs >= 3 rows");
  const double dt = cfg.dt;

  RelabeledDataset out;
  out.episode_ids.push_back(episode.id);
  // accel[k] drives row k to row k+1
  std::vector<double> accel(rec.size() - 1);
  for (std::size_t k = 0; k + 1 < rec.size(); ++k) {
    const double raw = (rec[k + 1].v_follower - rec[k].v_follower) / dt;
    accel[k] = std::clamp(raw, cfg.a_min, cfg.a_max);
    if (accel[k] != raw) ++out.clipped_actions;
  }
  for (std::size_t t = 1; t + 1 < rec.size(); ++t) {
    const auto& now = rec[t];
    const auto& next = rec[t + 1];
    const double jerk = (accel[t] - accel[t - 1]) / dt;
    Transition tr;
    tr.state = normalize_state(now.v_follower, accel[t - 1], now.v_leader, now.gap, cfg);
    tr.action = accel[t];
    tr.next_state = normalize_state(next.v_follower, accel[t], next.v_leader, next.gap, cfg);
    tr.reward = transition_reward(next.v_follower, next.v_leader, next.gap, jerk, reward_cfg).total;
    tr.done = t + 2 == rec.size();
    out.transitions.push_back(tr);
    out.episode_of.push_back(0);
  }
  out.histogram = reward_histogram(out);
  return out;
}

std::pair<RelabeledDataset, RelabeledDataset> split_train_eval(const RelabeledDataset& data, double frac,
                                                               std::uint64_t seed) {
  if (data.empty()) throw ValidationError("split_train_eval: empty dataset");
  if (!(frac > 0 && frac <= 1)) throw ValidationError("split_train_eval: frac must be in (0, 1]");
  std::mt19937_64 rng(seed);
  const std::size_t n_episodes = data.episode_ids.size();
  std::vector<std::size_t> per_episode(n_episodes, 0);
  for (auto e : data.episode_of) ++per_episode[e];

  std::vector<bool> to_train(data.size(), true);
  if (n_episodes >= 20) {
    std::vector<std::size_t> order(n_episodes);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    const auto target = static_cast<std::size_t>(std::llround((1.0 - frac) * static_cast<double>(data.size())));
    std::vector<bool> eval_episode(n_episodes, false);
    std::size_t taken = 0;
    for (std::size_t i = 0; i < n_episodes && taken < target; ++i) {
      eval_episode[order[i]] = true;
      taken += per_episode[order[i]];
    }
    for (std::size_t i = 0; i < data.size(); ++i) to_train[i] = !eval_episode[data.episode_of[i]];
  } else {
    // contiguous block of each episode, located at a seeded offset
    std::vector<std::size_t> first(n_episodes, data.size());
    for (std::size_t i = data.size(); i-- > 0;) first[data.episode_of[i]] = i;
    for (std::size_t e = 0; e < n_episodes; ++e) {
      const std::size_t n = per_episode[e];
      if (n == 0) continue;
      const auto len = static_cast<std::size_t>(std::llround((1.0 - frac) * static_cast<double>(n)));
      const std::size_t offset = std::uniform_int_distribution<std::size_t>(0, n - len)(rng);
      for (std::size_t k = 0; k < len; ++k) to_train[first[e] + offset + k] = false;
    }
  }
  std::vector<bool> to_eval(to_train.size());
  std::transform(to_train.begin(), to_train.end(), to_eval.begin(), [](bool b) { return !b; });
  auto train = subset(data, to_train);
  auto eval = subset(data, to_eval);
  return {std::move(train), std::move(eval)};
}

ReplayBuffer to_replay_buffer(const RelabeledDataset& data) {
  if (data.empty()) throw ValidationError("to_replay_buffer: empty dataset");
  ReplayBuffer buf(data.size());
  for (const auto& t : data.transitions) buf.push(t);
  return buf;
}

void save_store(const std::filesystem::path& path, const RelabeledDataset& data) {
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    out.write(kStoreMagic.data(), kStoreMagic.size());
    put(out, static_cast<std::uint64_t>(data.clipped_actions));
    put(out, static_cast<std::uint64_t>(data.episode_ids.size()));
    for (const auto& id : data.episode_ids) {
      put(out, static_cast<std::uint32_t>(id.size()));
      out.write(id.data(), static_cast<std::streamsize>(id.size()));
    }
    put(out, static_cast<std::uint64_t>(data.transitions.size()));
    for (std::size_t i = 0; i < data.transitions.size(); ++i) {
      const auto& t = data.transitions[i];
      put_obs(out, t.state);
      put(out, t.action);
      put(out, t.reward);
      put_obs(out, t.next_state);
      put(out, static_cast<std::uint8_t>(t.done ? 1 : 0));
      put(out, data.episode_of[i]);
    }
    if (!out) throw ValidationError("failed writing " + path.string());
  }

  const auto h = reward_histogram(data);
  nlohmann::json manifest;
  manifest["format"] = "FRLTRN01";
  manifest["transitions"] = data.transitions.size();
  manifest["episodes"] = data.episode_ids;
  manifest["clipped_actions"] = data.clipped_actions;
  manifest["histogram"] = {{"low", RewardHistogram::kLow},   {"high", RewardHistogram::kHigh},
                           {"width", RewardHistogram::kWidth}, {"counts", h.counts},
                           {"underflow", h.underflow},        {"overflow", h.overflow},
                           {"fraction_good", h.fraction_good}, {"fraction_zero", h.fraction_zero}};
  std::ofstream mf(path.string() + ".json");
  mf << manifest.dump(2) << '\n';
}

RelabeledDataset load_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kStoreMagic) throw ValidationError("not a transition store: " + path.string());
  RelabeledDataset data;
  data.clipped_actions = get<std::uint64_t>(in, path);
  const auto n_ep = get<std::uint64_t>(in, path);
  for (std::uint64_t e = 0; e < n_ep; ++e) {
    const auto len = get<std::uint32_t>(in, path);
    std::string id(len, '\0');
    in.read(id.data(), len);
    if (!in) throw ValidationError("truncated transition store " + path.string());
    data.episode_ids.push_back(std::move(id));
  }
  const auto n = get<std::uint64_t>(in, path);
  for (std::uint64_t i = 0; i < n; ++i) {
    Transition t;
    t.state = get_obs(in, path);
    t.action = get<double>(in, path);
    t.reward = get<double>(in, path);
    t.next_state = get_obs(in, path);
    t.done = get<std::uint8_t>(in, path) != 0;
    const auto ep = get<std::uint32_t>(in, path);
    if (ep >= n_ep) throw ValidationError("bad episode index in " + path.string());
    data.transitions.push_back(t);
    data.episode_of.push_back(ep);
  }
  data.histogram = reward_histogram(data);
  return data;
}

std::vector<std::filesystem::path> expand_glob(const std::string& pattern) {
  glob_t g{};
  std::vector<std::filesystem::path> out;
  const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
  if (rc == 0) {
    for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
  }
  globfree(&g);
  if (rc != 0 && rc != GLOB_NOMATCH) throw ValidationError("glob failed for " + pattern);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace followrl
