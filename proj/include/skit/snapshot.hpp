#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "skit/engine.hpp"

namespace skit {

// Versioned, field-tagged snapshot format. Floats are serialized as JSON
// numbers; nlohmann/json emits round-trip-safe representations, so a
// restore reproduces the exact 64-bit values.
inline constexpr int kSnapshotVersion = 1;

namespace detail {

using nlohmann::json;

inline json to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Vector vector_from_json(const json& a) {
  Vector v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = a[i];
  return v;
}

inline json to_json(const Matrix& m) {
  json out;
  out["rows"] = m.rows();
  out["cols"] = m.cols();
  json data = json::array();
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) data.push_back(m(r, c));
  }
  out["data"] = std::move(data);
  return out;
}

inline Matrix matrix_from_json(const json& j) {
  Matrix m(j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
  const auto& data = j.at("data");
  std::size_t k = 0;
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = data.at(k++);
  }
  return m;
}

inline json to_json(const KernelSpec& k) {
  return {{"kind", static_cast<int>(k.kind)}, {"bandwidth", k.bandwidth}};
}

inline KernelSpec kernel_from_json(const json& j) {
  return {static_cast<KernelKind>(j.at("kind").get<int>()), j.at("bandwidth").get<double>()};
}

inline json to_json(const HsicState& h) {
  json j;
  j["kernel_x"] = to_json(h.kernel_x());
  j["kernel_y"] = to_json(h.kernel_y());
  j["xs"] = to_json(h.stored_x());
  j["ys"] = to_json(h.stored_y());
  j["k_rowsums"] = to_json(h.k_rowsums());
  j["l_rowsums"] = to_json(h.l_rowsums());
  j["delta1"] = h.delta1();
  j["delta2"] = h.delta2();
  j["delta3"] = h.delta3();
  j["delta4"] = h.delta4();
  return j;
}

inline HsicState hsic_from_json(const json& j) {
  return HsicState::from_fields(
      kernel_from_json(j.at("kernel_x")), kernel_from_json(j.at("kernel_y")),
      matrix_from_json(j.at("xs")), matrix_from_json(j.at("ys")),
      vector_from_json(j.at("k_rowsums")), vector_from_json(j.at("l_rowsums")),
      j.at("delta1"), j.at("delta2"), j.at("delta3"), j.at("delta4"));
}

inline json to_json(const CocoKccState& c) {
  json j;
  j["kernel_x"] = to_json(c.kernel_x());
  j["kernel_y"] = to_json(c.kernel_y());
  j["criterion"] = static_cast<int>(c.criterion());
  j["kappa1"] = c.kappa1();
  j["kappa2"] = c.kappa2();
  j["delta0"] = c.delta0();
  j["xs"] = to_json(c.stored_x());
  j["ys"] = to_json(c.stored_y());
  j["fit_n"] = c.fit_n();
  j["next_refit_at"] = c.next_refit_at();
  j["last_value"] = c.last_value();
  j["degenerate_refits"] = c.degenerate_refits();
  j["clamp_events"] = c.clamp_events();
  if (c.has_coeffs()) {
    j["alpha"] = to_json(c.coeffs().alpha);
    j["beta"] = to_json(c.coeffs().beta);
  }
  return j;
}

inline CocoKccState coco_from_json(const json& j) {
  std::optional<WitnessCoefficients> coeffs;
  const auto crit = static_cast<DependenceCriterion>(j.at("criterion").get<int>());
  if (j.contains("alpha")) {
    WitnessCoefficients w;
    w.alpha = vector_from_json(j.at("alpha"));
    w.beta = vector_from_json(j.at("beta"));
    w.criterion = crit;
    w.kappa1 = j.at("kappa1");
    w.kappa2 = j.at("kappa2");
    coeffs = std::move(w);
  }
  return CocoKccState::from_fields(
      kernel_from_json(j.at("kernel_x")), kernel_from_json(j.at("kernel_y")), crit,
      j.at("kappa1"), j.at("kappa2"), j.at("delta0"), matrix_from_json(j.at("xs")),
      matrix_from_json(j.at("ys")), std::move(coeffs), j.at("fit_n"),
      j.at("next_refit_at"), j.at("last_value"), j.at("degenerate_refits"),
      j.at("clamp_events"));
}

inline json to_json(const SymmetryState& s) {
  json j;
  j["hsic"] = to_json(s.hsic());
  j["abs_history"] = s.abs_history();
  j["sign_history"] = s.sign_history();
  j["weight"] = s.predictor_weight();
  j["bias"] = s.predictor_bias();
  j["q_lo"] = s.quantile_lo();
  j["q_hi"] = s.quantile_hi();
  return j;
}

inline SymmetryState symmetry_from_json(const json& j) {
  return SymmetryState::from_fields(
      hsic_from_json(j.at("hsic")), j.at("abs_history").get<std::vector<double>>(),
      j.at("sign_history").get<std::vector<double>>(), j.at("weight"), j.at("bias"),
      j.at("q_lo"), j.at("q_hi"));
}

inline json to_json(const BettorState& b) {
  json j;
  if (const auto* ons = std::get_if<OnsState>(&b)) {
    j["kind"] = "ons";
    j["lambda"] = ons->lambda;
    j["a"] = ons->a;
  } else if (const auto* ag = std::get_if<AgrapaState>(&b)) {
    j["kind"] = "agrapa";
    j["mu1"] = ag->mu1;
    j["mu2"] = ag->mu2;
    j["c"] = ag->c;
    j["lambda"] = ag->lambda;
  } else if (const auto* mix = std::get_if<MixtureState>(&b)) {
    j["kind"] = "mixture";
    j["grid"] = mix->grid;
    j["log_wealths"] = mix->log_wealths;
  } else {
    j["kind"] = "fixed";
    j["lambda"] = std::get<FixedState>(b).lambda;
  }
  return j;
}

inline BettorState bettor_from_json(const json& j) {
  const std::string kind = j.at("kind");
  if (kind == "ons") {
    OnsState s;
    s.lambda = j.at("lambda");
    s.a = j.at("a");
    return s;
  }
  if (kind == "agrapa") {
    AgrapaState s;
    s.mu1 = j.at("mu1");
    s.mu2 = j.at("mu2");
    s.c = j.at("c");
    s.lambda = j.at("lambda");
    return s;
  }
  if (kind == "mixture") {
    MixtureState s(j.at("grid").get<std::vector<double>>());
    s.log_wealths = j.at("log_wealths").get<std::vector<double>>();
    return s;
  }
  if (kind == "fixed") {
    return FixedState{j.at("lambda")};
  }
  throw FormatError("snapshot: unknown bettor kind '" + kind + "'");
}

inline json to_json(const PairedObservation& z) {
  return {{"x", to_json(z.x)}, {"y", to_json(z.y)}};
}

}  // namespace detail

inline std::string snapshot(const TestSession& session) {
  using detail::json;
  json j;
  j["version"] = kSnapshotVersion;
  j["strategy"] = static_cast<int>(session.strategy());
  j["alpha"] = session.alpha();
  j["log_wealth"] = session.log_wealth();
  j["round"] = session.round();
  j["minibatch_b"] = session.minibatch_b();
  j["rng_seed"] = session.rng_seed();
  j["monitoring"] = session.monitoring();
  if (session.stopped()) j["stopped"] = *session.stopped();
  json pending = json::array();
  for (const auto& z : session.pending()) pending.push_back(detail::to_json(z));
  j["pending"] = std::move(pending);
  j["bettor"] = detail::to_json(session.bettor());
  std::visit([&j](const auto& state) { j["payoff_state"] = detail::to_json(state); },
             session.payoff_state());
  return j.dump();
}

inline TestSession restore(const std::string& record) {
  using detail::json;
  json j;
  try {
    j = json::parse(record);
  } catch (const json::exception& e) {
    throw FormatError(std::string("snapshot parse error: ") + e.what());
  }
  try {
    if (j.at("version").get<int>() != kSnapshotVersion) {
      throw FormatError("snapshot: unsupported version");
    }
    const auto strategy = static_cast<PayoffStrategy>(j.at("strategy").get<int>());
    std::variant<HsicState, CocoKccState, SymmetryState> ps;
    if (strategy == PayoffStrategy::Hsic) {
      ps = detail::hsic_from_json(j.at("payoff_state"));
    } else if (strategy == PayoffStrategy::Coco || strategy == PayoffStrategy::Kcc) {
      ps = detail::coco_from_json(j.at("payoff_state"));
    } else {
      ps = detail::symmetry_from_json(j.at("payoff_state"));
    }
    std::vector<PairedObservation> pending;
    for (const auto& p : j.at("pending")) {
      pending.emplace_back(detail::vector_from_json(p.at("x")),
                           detail::vector_from_json(p.at("y")));
    }
    std::optional<long> stopped;
    if (j.contains("stopped")) stopped = j.at("stopped").get<long>();
    return TestSession::from_fields(
        strategy, std::move(ps), detail::bettor_from_json(j.at("bettor")),
        j.at("alpha"), j.at("log_wealth"), j.at("round"), std::move(pending), stopped,
        j.at("minibatch_b"), j.at("rng_seed"), j.at("monitoring"));
  } catch (const json::exception& e) {
    throw FormatError(std::string("snapshot field error: ") + e.what());
  }
}

}  // namespace skit
