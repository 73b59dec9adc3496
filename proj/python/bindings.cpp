#include "followrl/baselines.hpp"
#include "followrl/config.hpp"
#include "followrl/control.hpp"
#include "followrl/ddpg.hpp"
#include "followrl/eval.hpp"
#include "followrl/pipeline.hpp"
#include "followrl/reward.hpp"
#include "followrl/sim.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace followrl;

PYBIND11_MODULE(_followrl, m) {
  m.doc() = "Car-following DDPG toolkit: reward, IDM, TTC, simulator and training entry points";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);

  py::class_<RewardConfig>(m, "RewardConfig")
      .def(py::init<>())
      .def_readwrite("time_gap", &RewardConfig::time_gap)
      .def_readwrite("time_gap_limit", &RewardConfig::time_gap_limit)
      .def_readwrite("g_min", &RewardConfig::g_min)
      .def_readwrite("b_comf", &RewardConfig::b_comf)
      .def_readwrite("j_comf", &RewardConfig::j_comf)
      .def_readwrite("w_safe", &RewardConfig::w_safe)
      .def_readwrite("w_gap", &RewardConfig::w_gap)
      .def_readwrite("w_jerk", &RewardConfig::w_jerk);

  py::class_<SimConfig>(m, "SimConfig")
      .def(py::init<>())
      .def_readwrite("dt", &SimConfig::dt)
      .def_readwrite("a_min", &SimConfig::a_min)
      .def_readwrite("a_max", &SimConfig::a_max)
      .def_readwrite("v_des", &SimConfig::v_des)
      .def_readwrite("g_max", &SimConfig::g_max)
      .def_readwrite("max_steps", &SimConfig::max_steps);

  py::class_<IdmParams>(m, "IdmParams")
      .def(py::init<>())
      .def_readwrite("v_des", &IdmParams::v_des)
      .def_readwrite("time_gap", &IdmParams::time_gap)
      .def_readwrite("accel", &IdmParams::accel)
      .def_readwrite("b_comf", &IdmParams::b_comf)
      .def_readwrite("g_min", &IdmParams::g_min)
      .def_readwrite("delta", &IdmParams::delta);

  py::class_<EvalConfig>(m, "EvalConfig")
      .def(py::init<>())
      .def_readwrite("ttc_threshold", &EvalConfig::ttc_threshold)
      .def_readwrite("ttc_critical", &EvalConfig::ttc_critical);

  py::class_<Config>(m, "Config")
      .def(py::init<>())
      .def_readwrite("sim", &Config::sim)
      .def_readwrite("reward", &Config::reward)
      .def_readwrite("idm", &Config::idm)
      .def_readwrite("eval", &Config::eval)
      .def("validate", &Config::validate)
      .def_static("parse", &parse_config, py::arg("text"))
      .def_static("load", &load_config, py::arg("path"))
      .def("format", [](const Config& c) { return format_config(c); });

  py::class_<RewardBreakdown>(m, "RewardBreakdown")
      .def_readonly("r_safe", &RewardBreakdown::r_safe)
      .def_readonly("r_gap", &RewardBreakdown::r_gap)
      .def_readonly("r_jerk", &RewardBreakdown::r_jerk)
      .def_readonly("total", &RewardBreakdown::total)
      .def_readonly("b_kin", &RewardBreakdown::b_kin)
      .def_readonly("g_opt", &RewardBreakdown::g_opt)
      .def_readonly("g_lim", &RewardBreakdown::g_lim);

  m.def("reward_total", &reward_total, py::arg("v"), py::arg("v_leader"), py::arg("gap"), py::arg("jerk"),
        py::arg("cfg") = RewardConfig{});
  m.def("transition_reward", &transition_reward, py::arg("v"), py::arg("v_leader"), py::arg("gap"),
        py::arg("jerk"), py::arg("cfg") = RewardConfig{});

  m.def("idm_accel", &idm_accel, py::arg("v"), py::arg("v_leader"), py::arg("gap"), py::arg("params") = IdmParams{},
        py::arg("a_min") = -9.0, py::arg("a_max") = 5.0);
  m.def("idm_equilibrium_gap", &idm_equilibrium_gap, py::arg("v"), py::arg("params") = IdmParams{});

  m.def("ttc", &ttc, py::arg("gap"), py::arg("v_follower"), py::arg("v_leader"));

  py::class_<TtcSummary>(m, "TtcSummary")
      .def_readonly("threshold", &TtcSummary::threshold)
      .def_readonly("count", &TtcSummary::count)
      .def_readonly("defined", &TtcSummary::defined)
      .def_readonly("minimum", &TtcSummary::minimum)
      .def_readonly("mean", &TtcSummary::mean)
      .def_readonly("median", &TtcSummary::median)
      .def_readonly("stddev", &TtcSummary::stddev)
      .def_readonly("count_critical", &TtcSummary::count_critical);

  m.def(
      "ttc_summary",
      [](const std::vector<std::optional<double>>& values, const EvalConfig& cfg) { return ttc_summary(values, cfg); },
      py::arg("values"), py::arg("cfg") = EvalConfig{});

  m.def("ou_path", &ou_path, py::arg("params"), py::arg("n_steps"), py::arg("dt"), py::arg("seed"));
  py::class_<OuParams>(m, "OuParams")
      .def(py::init<>())
      .def(py::init([](double theta, double sigma, double mu, double x0) { return OuParams{theta, sigma, mu, x0}; }),
           py::arg("theta"), py::arg("sigma"), py::arg("mu") = 0.0, py::arg("x0") = 0.0)
      .def_readwrite("theta", &OuParams::theta)
      .def_readwrite("sigma", &OuParams::sigma)
      .def_readwrite("mu", &OuParams::mu)
      .def_readwrite("x0", &OuParams::x0);

  m.def(
      "gen_leader_profile",
      [](std::uint64_t seed, double duration, const SimConfig& cfg) {
        return gen_leader_profile(seed, duration, cfg).speed;
      },
      py::arg("seed"), py::arg("duration"), py::arg("cfg") = SimConfig{});

  m.def("practical_share", &practical_share, py::arg("batch_size"), py::arg("ratio"));

  py::class_<PowertrainModel>(m, "PowertrainModel")
      .def(py::init<>())
      .def_readwrite("c_throttle", &PowertrainModel::c_throttle)
      .def_readwrite("c_brake", &PowertrainModel::c_brake)
      .def_readwrite("c_drag", &PowertrainModel::c_drag)
      .def_readwrite("c_roll", &PowertrainModel::c_roll)
      .def_readwrite("v_max", &PowertrainModel::v_max);
  m.def(
      "powertrain_step",
      [](const PowertrainModel& model, double throttle, double brake, double v, double dt) {
        const auto out = powertrain_step(model, throttle, brake, v, dt);
        return py::make_tuple(out.accel, out.v_next);
      },
      py::arg("model"), py::arg("throttle"), py::arg("brake"), py::arg("v"), py::arg("dt") = 0.1);

  m.def(
      "train",
      [](const Config& cfg, const std::string& mode, std::uint64_t seed, std::int64_t budget,
         const std::filesystem::path& out) {
        TrainRequest req;
        req.mode = parse_train_mode(mode);
        req.seed = seed;
        req.budget = budget;
        req.out = out;
        py::gil_scoped_release release;
        const auto s = run_training(cfg, req);
        return std::make_tuple(s.env_steps, s.episodes, s.last50_reward);
      },
      py::arg("cfg"), py::arg("mode"), py::arg("seed"), py::arg("budget"), py::arg("out"),
      "Returns (env_steps, episodes, last50_reward). Modes needing a dataset are CLI only.");
}
