#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "skit/datagen.hpp"
#include "skit/snapshot.hpp"

using namespace skit;

namespace {

TestSession make_session(PayoffStrategy strat, BettorState bettor) {
  if (strat == PayoffStrategy::Coco || strat == PayoffStrategy::Kcc) {
    const auto crit = strat == PayoffStrategy::Coco ? DependenceCriterion::COCO
                                                    : DependenceCriterion::KCC;
    return TestSession(strat,
                       CocoKccState(KernelSpec::rbf(0.25), KernelSpec::rbf(0.25), crit),
                       std::move(bettor), 0.05);
  }
  return TestSession(strat, HsicState(KernelSpec::rbf(0.25), KernelSpec::rbf(0.25)),
                     std::move(bettor), 0.05);
}

/// Feeds `n` observations to both sessions and requires identical wealth at
/// every round (exact, not approximate).
void feed_identically(TestSession& a, TestSession& b, ObservationStream& stream, int n) {
  for (int i = 0; i < n; ++i) {
    if (a.stopped() || b.stopped()) break;
    const auto z = stream();
    const auto ra = a.feed(z);
    const auto rb = b.feed(z);
    REQUIRE(ra.has_value() == rb.has_value());
    REQUIRE(a.log_wealth() == b.log_wealth());
  }
}

}  // namespace

TEST_CASE("split runs are bit-exact across a snapshot") {
  const std::vector<std::pair<PayoffStrategy, BettorState>> cases = {
      {PayoffStrategy::Hsic, OnsState{}},
      {PayoffStrategy::Hsic, MixtureState{}},
      {PayoffStrategy::SymOdd, AgrapaState{}},
      {PayoffStrategy::SymRank, AgrapaState{}},
      {PayoffStrategy::SymPred, OnsState{}},
      {PayoffStrategy::Coco, AgrapaState{}},
      {PayoffStrategy::Kcc, OnsState{}},
  };
  std::uint64_t seed = 1000;
  for (const auto& [strat, bettor] : cases) {
    INFO("strategy " << static_cast<int>(strat));
    auto reference = make_session(strat, bettor);
    auto live = make_session(strat, bettor);
    auto stream = gaussian_stream(0.6, seed++);

    // Warm both up on the same prefix (odd length so a pair straddles the
    // snapshot boundary), then continue one of them from its snapshot.
    for (int i = 0; i < 41; ++i) {
      const auto z = stream();
      reference.feed(z);
      live.feed(z);
    }
    auto restored = restore(snapshot(live));
    REQUIRE(restored.log_wealth() == reference.log_wealth());
    REQUIRE(restored.round() == reference.round());
    REQUIRE(restored.pending().size() == 1);

    feed_identically(reference, restored, stream, 60);
  }
}

TEST_CASE("snapshot preserves verdicts and freezes") {
  auto s = make_session(PayoffStrategy::Hsic, AgrapaState{});
  auto stream = gaussian_stream(1.2, 5);
  run_stream(s, stream, 20000);
  REQUIRE(s.stopped().has_value());
  auto r = restore(snapshot(s));
  CHECK(r.stopped() == s.stopped());
  CHECK(r.log_wealth() == s.log_wealth());
  CHECK_THROWS_AS(r.feed(PairedObservation::scalar(0.0, 0.0)), StateError);
}

TEST_CASE("snapshot preserves monitoring and minibatch configuration") {
  TestSession s(PayoffStrategy::Hsic,
                HsicState(KernelSpec::rbf(0.5), KernelSpec::rbf(0.5)), OnsState{}, 0.01,
                77, 5);
  s.set_monitoring(false);
  auto stream = gaussian_stream(0.2, 6);
  for (int i = 0; i < 23; ++i) s.feed(stream());
  auto r = restore(snapshot(s));
  CHECK(r.minibatch_b() == 5);
  CHECK(r.alpha() == 0.01);
  CHECK(r.rng_seed() == 77);
  CHECK_FALSE(r.monitoring());
  CHECK(r.pending().size() == s.pending().size());
}

TEST_CASE("restore rejects malformed records") {
  CHECK_THROWS_AS(restore("not json"), FormatError);
  CHECK_THROWS_AS(restore("{}"), FormatError);
  CHECK_THROWS_AS(restore(R"({"version": 999})"), FormatError);
  auto s = make_session(PayoffStrategy::Hsic, OnsState{});
  auto record = snapshot(s);
  // Corrupt a required field name.
  const auto pos = record.find("log_wealth");
  REQUIRE(pos != std::string::npos);
  record.replace(pos, 10, "log_wealtX");
  CHECK_THROWS_AS(restore(record), FormatError);
}
