#pragma once

#include <algorithm>
#include <optional>
#include <random>
#include <variant>
#include <vector>

#include "skit/betting.hpp"
#include "skit/coco_kcc.hpp"
#include "skit/common.hpp"
#include "skit/hsic.hpp"
#include "skit/symmetry.hpp"

namespace skit {

enum class PayoffStrategy { Hsic, Coco, Kcc, SymOdd, SymRank, SymPred };

inline bool is_symmetry(PayoffStrategy s) {
  return s == PayoffStrategy::SymOdd || s == PayoffStrategy::SymRank ||
         s == PayoffStrategy::SymPred;
}

struct RoundReport {
  long t{0};
  double f{0.0};
  double lambda{0.0};
  double wealth{1.0};
  double log_wealth{0.0};
  bool stopped{false};
};

struct Verdict {
  bool rejected{false};
  std::optional<long> stopping_time{};  // in betting rounds (pairs/blocks)
  double final_wealth{1.0};
  long rounds_processed{0};
};

/// One sequential test: payoff strategy + bettor + wealth process. Wealth is
/// tracked in log space; the stop check fires once wealth >= 1/alpha. After
/// stopping the session is frozen and further feeds are rejected.
class TestSession {
 public:
  TestSession() = default;
  TestSession(PayoffStrategy strategy, HsicState hsic, BettorState bettor, double alpha,
              std::uint64_t seed = 0, Eigen::Index minibatch_b = 2)
      : strategy_(strategy),
        bettor_(std::move(bettor)),
        alpha_(alpha),
        minibatch_b_(minibatch_b),
        rng_seed_(seed) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0,1)");
    if (minibatch_b < 2) throw InputError("minibatch size must be >= 2");
    if (is_symmetry(strategy)) {
      payoff_state_ = SymmetryState(hsic.kernel_x(), hsic.kernel_y());
    } else if (strategy == PayoffStrategy::Hsic) {
      payoff_state_ = std::move(hsic);
    } else {
      throw InputError("COCO/KCC sessions must be built with a CocoKccState");
    }
    if (minibatch_b != 2 && strategy != PayoffStrategy::Hsic) {
      throw InputError("minibatching is only supported for the HSIC payoff");
    }
  }
  TestSession(PayoffStrategy strategy, CocoKccState state, BettorState bettor,
              double alpha, std::uint64_t seed = 0)
      : strategy_(strategy),
        payoff_state_(std::move(state)),
        bettor_(std::move(bettor)),
        alpha_(alpha),
        rng_seed_(seed) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0,1)");
    if (strategy != PayoffStrategy::Coco && strategy != PayoffStrategy::Kcc) {
      throw InputError("CocoKccState requires the COCO or KCC strategy");
    }
  }

  PayoffStrategy strategy() const { return strategy_; }
  double alpha() const { return alpha_; }
  double threshold() const { return monitoring_ ? 1.0 / alpha_ : std::numeric_limits<double>::infinity(); }
  double wealth() const { return std::exp(log_wealth_); }
  double log_wealth() const { return log_wealth_; }
  long round() const { return round_; }
  std::optional<long> stopped() const { return stopped_; }
  Eigen::Index minibatch_b() const { return minibatch_b_; }
  std::uint64_t rng_seed() const { return rng_seed_; }
  const BettorState& bettor() const { return bettor_; }
  BettorState& bettor() { return bettor_; }
  const std::variant<HsicState, CocoKccState, SymmetryState>& payoff_state() const {
    return payoff_state_;
  }
  std::variant<HsicState, CocoKccState, SymmetryState>& payoff_state() {
    return payoff_state_;
  }
  const std::vector<PairedObservation>& pending() const { return pending_; }
  const std::vector<RoundReport>& trajectory() const { return trajectory_; }
  void set_record_trajectory(bool on) { record_trajectory_ = on; }
  bool record_trajectory() const { return record_trajectory_; }
  /// Disables the 1/alpha stop check (wealth keeps compounding); used by the
  /// derandomized batch test which needs terminal wealth.
  void set_monitoring(bool on) { monitoring_ = on; }
  bool monitoring() const { return monitoring_; }

  /// Consumes one observation; returns a report when a betting round completes.
  std::optional<RoundReport> feed(const PairedObservation& z) {
    if (stopped_) throw StateError("feed after the session has stopped");
    if (!z.finite()) throw InputError("observation coordinates must be finite");
    pending_.push_back(z);
    if (static_cast<Eigen::Index>(pending_.size()) < minibatch_b_) return std::nullopt;
    std::vector<PairedObservation> block;
    block.swap(pending_);
    return complete_round(block);
  }

  Verdict verdict() const {
    Verdict v;
    v.rejected = stopped_.has_value();
    v.stopping_time = stopped_;
    v.final_wealth = wealth();
    v.rounds_processed = round_;
    return v;
  }

  // Snapshot plumbing.
  static TestSession from_fields(PayoffStrategy strategy,
                                 std::variant<HsicState, CocoKccState, SymmetryState> ps,
                                 BettorState bettor, double alpha, double log_wealth,
                                 long round, std::vector<PairedObservation> pending,
                                 std::optional<long> stopped, Eigen::Index minibatch_b,
                                 std::uint64_t seed, bool monitoring) {
    TestSession s;
    s.strategy_ = strategy;
    s.payoff_state_ = std::move(ps);
    s.bettor_ = std::move(bettor);
    s.alpha_ = alpha;
    s.log_wealth_ = log_wealth;
    s.round_ = round;
    s.pending_ = std::move(pending);
    s.stopped_ = stopped;
    s.minibatch_b_ = minibatch_b;
    s.rng_seed_ = seed;
    s.monitoring_ = monitoring;
    return s;
  }

 private:
  /// The normative round ordering: payoff from the current (past-data)
  /// witness, wealth update, stop check, bettor update, witness append.
  RoundReport complete_round(const std::vector<PairedObservation>& block) {
    ++round_;
    const double f = compute_payoff(block);

    double lambda = current_lambda();
    if (auto* mix = std::get_if<MixtureState>(&bettor_)) {
      const double before = log_wealth_;
      log_wealth_ = mix->update(f);
      // Effective fraction implied by the mixture's one-round factor.
      lambda = f != 0.0 ? std::expm1(log_wealth_ - before) / f : 0.0;
    } else {
      log_wealth_ += std::log1p(lambda * f);
    }

    RoundReport report{round_, f, lambda, wealth(), log_wealth_, false};
    if (monitoring_ && wealth() >= 1.0 / alpha_) {
      stopped_ = round_;
      report.stopped = true;
    } else {
      update_bettor(f);
      absorb(block);
    }
    if (record_trajectory_) trajectory_.push_back(report);
    return report;
  }

  double compute_payoff(const std::vector<PairedObservation>& block) {
    switch (strategy_) {
      case PayoffStrategy::Hsic: {
        auto& h = std::get<HsicState>(payoff_state_);
        if (minibatch_b_ == 2) return h.payoff(block[0], block[1]);
        return h.minibatch_payoff(block, minibatch_b_);
      }
      case PayoffStrategy::Coco:
      case PayoffStrategy::Kcc:
        return std::get<CocoKccState>(payoff_state_).payoff(block[0], block[1]);
      case PayoffStrategy::SymOdd:
      case PayoffStrategy::SymRank:
      case PayoffStrategy::SymPred: {
        auto& s = std::get<SymmetryState>(payoff_state_);
        last_w_ = s.compute_w(block[0], block[1]);
        return s.payoff(sym_kind(), last_w_);
      }
    }
    throw InternalInvariantError("unknown payoff strategy");
  }

  void absorb(const std::vector<PairedObservation>& block) {
    switch (strategy_) {
      case PayoffStrategy::Hsic: {
        auto& h = std::get<HsicState>(payoff_state_);
        for (const auto& z : block) h.append_one(z);
        break;
      }
      case PayoffStrategy::Coco:
      case PayoffStrategy::Kcc: {
        auto& c = std::get<CocoKccState>(payoff_state_);
        c.append_pair(block[0], block[1]);
        c.maybe_refit();
        break;
      }
      default: {
        auto& s = std::get<SymmetryState>(payoff_state_);
        s.finish_round(last_w_, block[0], block[1]);
        break;
      }
    }
  }

  SymmetryPayoff sym_kind() const {
    if (strategy_ == PayoffStrategy::SymOdd) return SymmetryPayoff::Odd;
    if (strategy_ == PayoffStrategy::SymRank) return SymmetryPayoff::Rank;
    return SymmetryPayoff::Predictive;
  }

  double current_lambda() const {
    if (const auto* ons = std::get_if<OnsState>(&bettor_)) return ons->lambda;
    if (const auto* ag = std::get_if<AgrapaState>(&bettor_)) return ag->lambda;
    if (const auto* fx = std::get_if<FixedState>(&bettor_)) return fx->lambda;
    return 0.0;  // mixture has no single fraction
  }

  void update_bettor(double f) {
    if (auto* ons = std::get_if<OnsState>(&bettor_)) ons->update(f);
    if (auto* ag = std::get_if<AgrapaState>(&bettor_)) ag->update(f);
    // mixture already updated during the wealth step; fixed never changes
  }

  PayoffStrategy strategy_{PayoffStrategy::Hsic};
  std::variant<HsicState, CocoKccState, SymmetryState> payoff_state_{};
  BettorState bettor_{OnsState{}};
  double alpha_{0.05};
  double log_wealth_{0.0};
  long round_{0};
  std::vector<PairedObservation> pending_{};
  std::optional<long> stopped_{};
  Eigen::Index minibatch_b_{2};
  std::uint64_t rng_seed_{0};
  bool monitoring_{true};
  bool record_trajectory_{false};
  std::vector<RoundReport> trajectory_{};
  double last_w_{0.0};
};

/// Feeds a stream until the session stops or `horizon` observations are used.
template <typename Stream>
Verdict run_stream(TestSession& session, Stream&& stream, long horizon) {
  if (horizon < 2) throw InputError("run_stream: horizon must be >= 2");
  for (long i = 0; i < horizon && !session.stopped(); ++i) {
    session.feed(stream());
  }
  return session.verdict();
}

/// Derandomized batch test: averages terminal wealth over B uniformly random
/// orderings of a fixed batch; rejects when the mean crosses 1/alpha.
template <typename SessionFactory>
std::pair<double, bool> d_skit(const std::vector<PairedObservation>& observations,
                               int B, const SessionFactory& make_session,
                               std::mt19937_64& rng) {
  if (observations.empty()) throw InputError("d_skit: empty batch");
  if (B < 1) throw InputError("d_skit: B must be >= 1");
  std::vector<std::size_t> order(observations.size());
  double total = 0.0;
  double alpha = 0.0;
  for (int b = 0; b < B; ++b) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    TestSession session = make_session();
    session.set_monitoring(false);  // terminal wealth, not a stopping time
    alpha = session.alpha();
    for (std::size_t i : order) session.feed(observations[i]);
    total += session.wealth();
  }
  const double mean_wealth = total / static_cast<double>(B);
  return {mean_wealth, mean_wealth >= 1.0 / alpha};
}

}  // namespace skit
