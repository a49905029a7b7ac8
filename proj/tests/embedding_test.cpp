#include "dalm/embedding.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "dalm/training.hpp"
#include "testutil.hpp"

using dalm::EmbeddingSpace;
using dalm::Geometry;
using dalm::TrainConfig;
using dalm::Vec;
using testutil::cr;
using testutil::dp;

TEST(PoincareDistance, Examples) {
  const Vec u = {0.3, -0.2};
  EXPECT_DOUBLE_EQ(dalm::poincare_distance(u, u), 0.0);
  // arcosh(1 + 2·0.25/(1·0.75)) = arcosh(5/3) = ln 3.
  EXPECT_NEAR(dalm::poincare_distance({0.0, 0.0}, {0.5, 0.0}), std::log(3.0),
              1e-15);
  EXPECT_THROW(dalm::poincare_distance({1.0, 0.0}, {0.0, 0.0}),
               dalm::OutsideBall);
  EXPECT_THROW(dalm::poincare_distance({0.1}, {0.1, 0.2}),
               dalm::DimensionMismatch);
}

TEST(PoincareDistance, SymmetryProperty) {
  dalm::SplitMix64 rng(51);
  for (int i = 0; i < 200; ++i) {
    Vec u(4), v(4);
    for (double& x : u) x = rng.uniform(-0.4, 0.4);
    for (double& x : v) x = rng.uniform(-0.4, 0.4);
    EXPECT_DOUBLE_EQ(dalm::poincare_distance(u, v),
                     dalm::poincare_distance(v, u));
    EXPECT_GE(dalm::poincare_distance(u, v), 0.0);
  }
}

TEST(PoincareDistance, HighPrecisionReferenceAtTenRandomPairs) {
  // Independent long-double evaluation of the same closed form.
  auto reference = [](const Vec& u, const Vec& v) {
    long double su = 0.0L, sv = 0.0L, d2 = 0.0L;
    for (std::size_t i = 0; i < u.size(); ++i) {
      su += static_cast<long double>(u[i]) * u[i];
      sv += static_cast<long double>(v[i]) * v[i];
      const long double d = static_cast<long double>(u[i]) - v[i];
      d2 += d * d;
    }
    const long double z = 1.0L + 2.0L * d2 / ((1.0L - su) * (1.0L - sv));
    return static_cast<double>(
        std::log(z + std::sqrt(z * z - 1.0L)));  // arcosh via log form
  };
  dalm::SplitMix64 rng(52);
  for (int i = 0; i < 10; ++i) {
    Vec u(6), v(6);
    for (double& x : u) x = rng.uniform(-0.35, 0.35);
    for (double& x : v) x = rng.uniform(-0.35, 0.35);
    const double got = dalm::poincare_distance(u, v);
    const double want = reference(u, v);
    EXPECT_NEAR(got, want, 1e-12 * std::max(1.0, std::abs(want)));
  }
}

TEST(LatticeLoss, Examples) {
  const Vec e1 = {0.1, 0.2};
  const Vec e2 = {0.3, -0.1};
  EXPECT_DOUBLE_EQ(dalm::lattice_loss(e1, e2, e2, 1.5, Geometry::euclidean),
                   1.5);
  // dist(e1,e3) ≥ dist(e1,e2) + γ → hinge inactive.
  EXPECT_DOUBLE_EQ(
      dalm::lattice_loss({0, 0}, {1, 0}, {0, 3}, 1.0, Geometry::euclidean),
      0.0);
  EXPECT_THROW(dalm::lattice_loss({0.0}, {0.0, 1.0}, {0.0, 2.0}, 1.0,
                                  Geometry::euclidean),
               dalm::DimensionMismatch);
}

TEST(LatticeLoss, NonNegativeProperty) {
  dalm::SplitMix64 rng(53);
  for (int i = 0; i < 200; ++i) {
    Vec e1(3), e2(3), e3(3);
    for (double& x : e1) x = rng.uniform(-1, 1);
    for (double& x : e2) x = rng.uniform(-1, 1);
    for (double& x : e3) x = rng.uniform(-1, 1);
    EXPECT_GE(dalm::lattice_loss(e1, e2, e3, 0.7, Geometry::euclidean), 0.0);
  }
}

TEST(RelationInDomain, Examples) {
  EmbeddingSpace space;
  space.dim = 2;
  space.relations["r"] = {1.0, 1.0};
  space.interactions["r"] = {0.5, 3.0};
  space.domains[dp("@D")] = {2.0, 0.0};
  space.domains[dp("@")] = {0.0, 0.0};
  EXPECT_EQ(dalm::relation_in_domain("r", dp("@D"), space), (Vec{2.0, 1.0}));
  // Zero domain vector leaves the base relation intact.
  EXPECT_EQ(dalm::relation_in_domain("r", dp("@"), space), (Vec{1.0, 1.0}));
  space.interactions["r"] = {0.0, 0.0};
  EXPECT_EQ(dalm::relation_in_domain("r", dp("@D"), space), (Vec{1.0, 1.0}));
}

namespace {

dalm::CrystalLibrary singleton_concept_library() {
  dalm::MetaFiber meta = dalm::default_meta_fiber();
  meta.tau.global["relates_to"] = dalm::Tau::monotone;  // not acyclic
  dalm::CrystalLibrary lib(meta);
  dalm::insert(cr("only", "relates_to", "@Solo", "only"), lib);
  return lib;
}

EmbeddingSpace zero_space_for(const dalm::CrystalLibrary& lib,
                              std::size_t dim) {
  EmbeddingSpace space;
  space.dim = dim;
  for (const auto& d : lib.lattice().known()) {
    space.domains[d] = Vec(dim, 0.0);
  }
  for (const auto& c : lib.all_concepts()) {
    space.concepts[c] = Vec(dim, 0.0);
    space.bias[c] = 0.0;
  }
  for (const auto& r : lib.meta().relation_names()) {
    space.relations[r] = Vec(dim, 0.0);
    space.interactions[r] = Vec(dim, 0.0);
  }
  return space;
}

}  // namespace

TEST(ConceptScores, SingletonFiberGetsProbabilityOne) {
  const auto lib = singleton_concept_library();
  const auto space = zero_space_for(lib, 4);
  const auto scores = dalm::concept_scores(dp("@Solo"), "relates_to", lib, space);
  ASSERT_EQ(scores.size(), 1u);
  EXPECT_EQ(scores[0].concept_id, "only");
  EXPECT_DOUBLE_EQ(scores[0].probability, 1.0);
}

TEST(ConceptScores, UniformOverEqualScoresAndSumsToOne) {
  dalm::CrystalLibrary lib;
  dalm::insert(cr("a", "is_a", "@D", "b"), lib);
  dalm::insert(cr("c", "is_a", "@D", "d"), lib);
  const auto space = zero_space_for(lib, 4);
  const auto scores = dalm::concept_scores(dp("@D"), "is_a", lib, space);
  ASSERT_EQ(scores.size(), 4u);
  double total = 0.0;
  for (const auto& s : scores) {
    EXPECT_DOUBLE_EQ(s.probability, 0.25);
    total += s.probability;
  }
  EXPECT_NEAR(total, 1.0, 1e-9);
}

TEST(ConceptScores, SupportIsExactlyTheFiberConceptSet) {
  dalm::CrystalLibrary lib = testutil::atom_library();
  TrainConfig config;
  config.dim = 8;
  config.seed = 3;
  const auto space = dalm::init_space(lib, config);
  for (const auto& d : lib.lattice().known()) {
    const auto support = dalm::effective_concepts(d, lib);
    if (support.empty()) continue;
    const auto scores = dalm::concept_scores(d, "is_a", lib, space);
    std::set<std::string> got;
    double total = 0.0;
    for (const auto& s : scores) {
      got.insert(s.concept_id);
      total += s.probability;
    }
    EXPECT_EQ(got, support) << "support mismatch at " << d.str();
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(ConceptScores, EmptyFiberThrows) {
  dalm::CrystalLibrary lib;
  lib.lattice().register_domain(dp("@Empty"));
  const auto space = zero_space_for(lib, 4);
  EXPECT_THROW(dalm::concept_scores(dp("@Empty"), "is_a", lib, space),
               dalm::EmptyFiber);
}

TEST(Snapshot, RoundTripPreservesDistancesTo1em12) {
  dalm::SplitMix64 rng(54);
  EmbeddingSpace space;
  space.geometry = Geometry::poincare;
  space.dim = 6;
  space.seed = 99;
  std::vector<dalm::DomainPath> domains;
  for (int i = 0; i < 12; ++i) {
    auto d = dp("@S" + std::to_string(i));
    domains.push_back(d);
    Vec v(6);
    for (double& x : v) x = rng.uniform(-0.35, 0.35);
    space.domains[d] = v;
  }
  space.concepts["c0"] = Vec(6, 0.125);
  space.relations["is_a"] = Vec(6, -0.25);
  space.interactions["is_a"] = Vec(6, 0.0625);
  space.bias["c0"] = 0.7071067811865476;

  const std::string text = dalm::save_space(space);
  EXPECT_EQ(dalm::save_space(space), text);
  const EmbeddingSpace reloaded = dalm::load_space(text);
  EXPECT_EQ(reloaded.geometry, space.geometry);
  EXPECT_EQ(reloaded.dim, space.dim);
  EXPECT_EQ(reloaded.seed, space.seed);
  for (const auto& a : domains) {
    for (const auto& b : domains) {
      const double before =
          dalm::poincare_distance(space.domains.at(a), space.domains.at(b));
      const double after = dalm::poincare_distance(reloaded.domains.at(a),
                                                   reloaded.domains.at(b));
      EXPECT_NEAR(before, after, 1e-12);
    }
  }
}

TEST(SampleTriplets, ChainOnlyLatticeIsInsufficient) {
  dalm::DomainLattice lattice;
  lattice.register_domain(dp("@A@B"));
  dalm::SplitMix64 rng(55);
  EXPECT_THROW(dalm::sample_triplets(lattice, 10, rng),
               dalm::InsufficientLattice);
}

TEST(SampleTriplets, SmallLatticeYieldsTheOffPathTriplet) {
  dalm::DomainLattice lattice;
  lattice.register_domain(dp("@A@B"));
  lattice.register_domain(dp("@C"));
  dalm::SplitMix64 rng(56);
  const auto triplets = dalm::sample_triplets(lattice, 20, rng);
  ASSERT_EQ(triplets.size(), 20u);
  for (const auto& t : triplets) {
    EXPECT_EQ(t.child, dp("@A@B"));
    EXPECT_EQ(t.parent, dp("@A"));
    EXPECT_EQ(t.offpath, dp("@C"));
  }
}

TEST(SampleTriplets, ConstraintCheckerOracleOnBranchingLattice) {
  const auto lattice = testutil::tree_lattice(3, 4);
  dalm::SplitMix64 rng(57);
  const auto triplets = dalm::sample_triplets(lattice, 1000, rng);
  ASSERT_EQ(triplets.size(), 1000u);
  for (const auto& t : triplets) {
    EXPECT_TRUE(dalm::triplet_constraints_hold(t))
        << t.child.str() << " / " << t.parent.str() << " / " << t.offpath.str();
    EXPECT_TRUE(lattice.contains(t.offpath));
  }
}

TEST(TrainDomainEmbeddings, ThreeDomainLatticeSatisfiesConstraint) {
  dalm::CrystalLibrary lib;
  lib.lattice().register_domain(dp("@A@B"));
  lib.lattice().register_domain(dp("@C"));
  TrainConfig config;
  config.dim = 8;
  config.epochs = 200;
  config.seed = 5;
  auto [space, report] = dalm::train_domain_embeddings(lib, config);
  EXPECT_EQ(report.epoch_loss.size(), 200u);
  EXPECT_DOUBLE_EQ(report.constraint_satisfaction, 1.0);
  const double pulled = dalm::euclidean_distance(space.domains.at(dp("@A@B")),
                                                 space.domains.at(dp("@A")));
  const double pushed = dalm::euclidean_distance(space.domains.at(dp("@A@B")),
                                                 space.domains.at(dp("@C")));
  EXPECT_LE(pulled, pushed);
}

TEST(TrainDomainEmbeddings, ZeroEpochsEchoesInitialLoss) {
  dalm::CrystalLibrary lib;
  lib.lattice().register_domain(dp("@A@B"));
  lib.lattice().register_domain(dp("@C"));
  TrainConfig config;
  config.dim = 4;
  config.epochs = 0;
  config.seed = 9;
  auto [space, report] = dalm::train_domain_embeddings(lib, config);
  ASSERT_EQ(report.epoch_loss.size(), 1u);
  EXPECT_GT(report.epoch_loss[0], 0.0);  // hinge active at near-zero init
  const EmbeddingSpace fresh = dalm::init_space(lib, config);
  EXPECT_EQ(space.domains, fresh.domains);
}

TEST(TrainDomainEmbeddings, SameSeedBitIdenticalLossCurves) {
  dalm::CrystalLibrary lib;
  for (const char* d : {"@A@B", "@A@C", "@D@E", "@F"}) {
    lib.lattice().register_domain(dp(d));
  }
  TrainConfig config;
  config.dim = 6;
  config.epochs = 50;
  config.seed = 1234;
  auto [space1, report1] = dalm::train_domain_embeddings(lib, config);
  auto [space2, report2] = dalm::train_domain_embeddings(lib, config);
  ASSERT_EQ(report1.epoch_loss.size(), report2.epoch_loss.size());
  for (std::size_t i = 0; i < report1.epoch_loss.size(); ++i) {
    EXPECT_EQ(report1.epoch_loss[i], report2.epoch_loss[i]);
  }
  EXPECT_EQ(space1.domains, space2.domains);
}

TEST(TrainDomainEmbeddings, PoincareVectorsStayInsideBall) {
  dalm::CrystalLibrary lib;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 3; ++j) {
      lib.lattice().register_domain(
          dp("@p" + std::to_string(i) + "@q" + std::to_string(j)));
    }
  }
  TrainConfig config;
  config.geometry = Geometry::poincare;
  config.dim = 16;
  config.epochs = 150;
  config.seed = 77;
  auto [space, report] = dalm::train_domain_embeddings(lib, config);
  (void)report;
  for (const auto& [_, v] : space.domains) {
    EXPECT_LT(dalm::norm(v), 1.0 - 1e-5 + 1e-12);
  }
}

TEST(TrainCompletion, SingleCrystalReachesHighConfidence) {
  dalm::CrystalLibrary lib;
  dalm::insert(cr("atom", "is_a", "@P", "particle"), lib);
  TrainConfig config;
  config.dim = 8;
  config.seed = 4;
  config.epochs = 3000;
  config.learning_rate = 0.1;
  auto space = dalm::init_space(lib, config);
  const auto report = dalm::train_completion(lib, space, config);
  const auto scores = dalm::concept_scores(dp("@P"), "is_a", lib, space);
  double p_target = 0.0;
  for (const auto& s : scores) {
    if (s.concept_id == "particle") p_target = s.probability;
  }
  EXPECT_GT(p_target, 0.99);
  EXPECT_LT(report.final_cross_entropy, report.epoch_loss.front());

  // Identical config and library reproduce identical vectors.
  auto again = dalm::init_space(lib, config);
  dalm::train_completion(lib, again, config);
  EXPECT_EQ(space.concepts, again.concepts);
  EXPECT_EQ(space.relations, again.relations);
  EXPECT_EQ(space.interactions, again.interactions);
  EXPECT_EQ(space.bias, again.bias);
}

TEST(TrainCompletion, ZeroEpochsLeaveSpaceUnchanged) {
  dalm::CrystalLibrary lib;
  dalm::insert(cr("a", "is_a", "@P", "b"), lib);
  TrainConfig config;
  config.dim = 4;
  config.seed = 11;
  config.epochs = 0;
  auto space = dalm::init_space(lib, config);
  const EmbeddingSpace before = space;
  const auto report = dalm::train_completion(lib, space, config);
  EXPECT_TRUE(report.epoch_loss.empty());
  EXPECT_EQ(space.concepts, before.concepts);
  EXPECT_EQ(space.bias, before.bias);
}

TEST(TrainCompletion, LossNonIncreasingOnFixture) {
  dalm::SplitMix64 rng(58);
  dalm::CrystalLibrary lib;
  const auto relations = lib.meta().relation_names();
  while (lib.crystal_count() < 50) {
    const std::string s = "k" + std::to_string(rng.index(15));
    const std::string o = "k" + std::to_string(rng.index(15));
    if (s == o) continue;
    dalm::insert(cr(s, relations[rng.index(relations.size())],
                    "@F" + std::to_string(rng.index(3)), o),
                 lib);
  }
  TrainConfig config;
  config.dim = 8;
  config.seed = 6;
  config.epochs = 120;
  config.learning_rate = 0.01;
  auto space = dalm::init_space(lib, config);
  const auto report = dalm::train_completion(lib, space, config);
  for (std::size_t i = 1; i < report.epoch_loss.size(); ++i) {
    EXPECT_LE(report.epoch_loss[i], report.epoch_loss[i - 1] + 1e-9);
  }
}

TEST(TrainCompletion, EmptyLibraryThrows) {
  dalm::CrystalLibrary empty;
  TrainConfig config;
  config.dim = 4;
  config.epochs = 1;
  auto space = dalm::init_space(empty, config);
  EXPECT_THROW(dalm::train_completion(empty, space, config),
               dalm::EmptyLibrary);
}

TEST(GradCheck, LatticeLossAgainstCentralDifferences) {
  dalm::SplitMix64 rng(59);
  for (int i = 0; i < 10; ++i) {
    EXPECT_LT(dalm::grad_check(dalm::LossKind::lattice, rng,
                               Geometry::euclidean),
              1e-4);
  }
  for (int i = 0; i < 10; ++i) {
    EXPECT_LT(dalm::grad_check(dalm::LossKind::lattice, rng,
                               Geometry::poincare),
              1e-3);
  }
}

TEST(GradCheck, PoincareDistanceAgainstCentralDifferences) {
  dalm::SplitMix64 rng(60);
  for (int i = 0; i < 10; ++i) {
    EXPECT_LT(dalm::grad_check(dalm::LossKind::poincare_distance, rng), 1e-3);
  }
}

TEST(GradCheck, CompletionLossAgainstCentralDifferences) {
  dalm::SplitMix64 rng(61);
  for (int i = 0; i < 3; ++i) {
    EXPECT_LT(dalm::grad_check(dalm::LossKind::completion, rng), 1e-4);
  }
}

TEST(GradCheck, HingeInactiveRegionHasExactlyZeroGradient) {
  const Vec e1 = {0.0, 0.0};
  const Vec e2 = {0.5, 0.0};
  const Vec e3 = {0.0, 5.0};  // pushed far beyond the margin
  const auto g = dalm::lattice_loss_grad(e1, e2, e3, 1.0, Geometry::euclidean);
  EXPECT_DOUBLE_EQ(g.loss, 0.0);
  for (double x : g.g1) EXPECT_DOUBLE_EQ(x, 0.0);
  for (double x : g.g2) EXPECT_DOUBLE_EQ(x, 0.0);
  for (double x : g.g3) EXPECT_DOUBLE_EQ(x, 0.0);
  // Central differences agree that the region is flat.
  Vec probe = e2;
  const double h = 1e-5;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    probe[i] += h;
    const double up = dalm::lattice_loss(e1, probe, e3, 1.0, Geometry::euclidean);
    probe[i] -= 2 * h;
    const double down =
        dalm::lattice_loss(e1, probe, e3, 1.0, Geometry::euclidean);
    probe[i] += h;
    EXPECT_LE(std::abs(up - down) / (2 * h), 1e-8);
  }
}
