#include "support.hpp"

#include "cdil/errors.hpp"
#include "cdil/splitters.hpp"

#include <doctest.h>

#include <algorithm>

using namespace cdil;

namespace {

std::vector<std::size_t> sorted_desc(std::vector<std::size_t> v) {
  std::sort(v.rbegin(), v.rend());
  return v;
}

// Independent count of the deal rule: unit i of n goes to fold (i mod k) + 1.
std::vector<std::size_t> deal_sizes(std::size_t n, int k) {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
  for (std::size_t i = 0; i < n; ++i) ++sizes[i % static_cast<std::size_t>(k)];
  return sorted_desc(sizes);
}

}  // namespace

TEST_CASE("protocol names") {
  CHECK(parse_protocol("SLCV") == Protocol::slcv);
  CHECK(parse_protocol("ilcv") == Protocol::ilcv);
  CHECK(to_string(Protocol::ilcv) == "ilcv");
  CHECK_THROWS_AS(parse_protocol("loso"), ConfigError);
}

TEST_CASE("slcv fold sizes follow the deal rule") {
  const auto ten = testing::make_session(1, 10, 3, {0, 1}, 2, 1);
  const auto a = slcv_partition(ten, 5, 9);
  CHECK(sorted_desc(a.unit_counts(ten)) == std::vector<std::size_t>{2, 2, 2, 2, 2});

  const auto eleven = testing::make_session(1, 11, 2, {0, 1}, 2, 1);
  const auto b = slcv_partition(eleven, 5, 9);
  CHECK(deal_sizes(11, 5) == std::vector<std::size_t>{3, 2, 2, 2, 2});
  CHECK(sorted_desc(b.unit_counts(eleven)) == deal_sizes(11, 5));

  std::set<std::string> covered;
  for (int tau = 1; tau <= 5; ++tau)
    for (const auto& id : b.fold_members(tau)) covered.insert(id);
  CHECK(covered.size() == eleven.size());
}

TEST_CASE("slcv keeps each subject in one fold") {
  const auto s = testing::make_session(1, 12, 5, {0, 1, 2}, 2, 4);
  const auto a = slcv_partition(s, 5, 3);
  std::map<std::string, int> fold_of_subject;
  for (const auto& x : s.samples()) {
    const int f = a.fold_of.at(x.sample_id);
    const auto [it, fresh] = fold_of_subject.emplace(x.subject_id, f);
    CHECK(it->second == f);
  }
}

TEST_CASE("slcv needs a subject per fold") {
  const auto s = testing::make_session(1, 4, 3, {0, 1}, 2, 1);
  CHECK_THROWS_WITH_AS(slcv_partition(s, 5, 0), doctest::Contains("fewer subjects than folds"),
                       ConfigError);
  CHECK_THROWS_AS(slcv_partition(s, 1, 0), ConfigError);
}

TEST_CASE("ilcv fold sizes follow the deal rule") {
  const auto hundred = testing::make_session(1, 10, 10, {0, 1}, 2, 1);
  CHECK(sorted_desc(ilcv_partition(hundred, 5, 2).unit_counts(hundred)) ==
        std::vector<std::size_t>{20, 20, 20, 20, 20});
  const auto s103 = testing::make_session(1, 1, 103, {0, 1}, 2, 1);
  const auto a = ilcv_partition(s103, 5, 2);
  CHECK(deal_sizes(103, 5) == std::vector<std::size_t>{21, 21, 21, 20, 20});
  CHECK(sorted_desc(a.unit_counts(s103)) == deal_sizes(103, 5));
  CHECK(a.fold_of.size() == 103);
  const auto tiny = testing::make_session(1, 1, 3, {0, 1}, 2, 1);
  CHECK_THROWS_AS(ilcv_partition(tiny, 5, 0), ConfigError);
}

TEST_CASE("partitions are deterministic in the seed") {
  const auto s = testing::make_session(1, 15, 4, {0, 1, 2}, 2, 8);
  CHECK(slcv_partition(s, 5, 77) == slcv_partition(s, 5, 77));
  CHECK(ilcv_partition(s, 5, 77) == ilcv_partition(s, 5, 77));
  CHECK(slcv_partition(s, 5, 77).fold_of != slcv_partition(s, 5, 78).fold_of);
}

TEST_CASE("fold seeds differ by session and protocol") {
  CHECK(fold_seed(5, 1, Protocol::slcv) != fold_seed(5, 1, Protocol::ilcv));
  CHECK(fold_seed(5, 1, Protocol::slcv) != fold_seed(5, 2, Protocol::slcv));
  CHECK(fold_seed(5, 1, Protocol::slcv) == fold_seed(5, 1, Protocol::slcv));
}

TEST_CASE("binding two sessions with k=2") {
  LabelRegistry reg({"a", "b"});
  SessionSequence seq({testing::make_session(1, 4, 2, {0, 1}, 2, 1),
                       testing::make_session(2, 4, 2, {0, 1}, 2, 2)},
                      reg, 2);
  const auto asg = partition_sequence(seq, Protocol::slcv, 2, 13);
  const auto p1 = bind_folds(asg, 1);
  const auto p2 = bind_folds(asg, 2);
  for (SessionIndex t = 1; t <= 2; ++t) {
    const auto f1 = asg[static_cast<std::size_t>(t - 1)].fold_members(1);
    CHECK(p1.split(t).test_ids == std::set<std::string>(f1.begin(), f1.end()));
    std::vector<std::string> overlap;
    std::set_intersection(p1.split(t).test_ids.begin(), p1.split(t).test_ids.end(),
                          p2.split(t).test_ids.begin(), p2.split(t).test_ids.end(),
                          std::back_inserter(overlap));
    CHECK(overlap.empty());
    CHECK(p1.split(t).test_ids.size() + p2.split(t).test_ids.size() == seq.session(t).size());
  }
  const auto cum = cumulative_test_ids(p1, 2);
  CHECK(cum.size() == p1.split(1).test_ids.size() + p1.split(2).test_ids.size());
  for (const auto& id : p1.split(1).test_ids) CHECK(cum.contains({1, id}));
  for (const auto& id : p1.split(2).test_ids) CHECK(cum.contains({2, id}));
  const auto first = cumulative_test_ids(p1, 1);
  CHECK(first.size() == p1.split(1).test_ids.size());
  CHECK_THROWS_AS(cumulative_test_ids(p1, 3), std::out_of_range);
}

TEST_CASE("train and test complement each other") {
  LabelRegistry reg({"a", "b", "c"});
  SessionSequence seq({testing::make_session(1, 7, 3, {0, 1}, 2, 1),
                       testing::make_session(2, 9, 2, {1, 2}, 2, 2)},
                      reg, 2);
  for (auto mode : {Protocol::slcv, Protocol::ilcv}) {
    const auto asg = partition_sequence(seq, mode, 3, 5);
    for (int tau = 1; tau <= 3; ++tau) {
      const auto plan = bind_folds(asg, tau);
      CHECK(plan.trial_index == tau);
      for (SessionIndex t = 1; t <= 2; ++t) {
        const auto& sp = plan.split(t);
        CHECK(sp.train_ids.size() + sp.test_ids.size() == seq.session(t).size());
        for (const auto& x : seq.session(t).samples())
          CHECK(sp.train_ids.contains(x.sample_id) != sp.test_ids.contains(x.sample_id));
      }
    }
  }
}

TEST_CASE("single session binding is plain k-fold") {
  LabelRegistry reg({"a", "b"});
  SessionSequence seq({testing::make_session(1, 10, 2, {0, 1}, 2, 1)}, reg, 2);
  const auto asg = partition_sequence(seq, Protocol::ilcv, 5, 3);
  std::set<std::string> all_test;
  for (int tau = 1; tau <= 5; ++tau) {
    const auto plan = bind_folds(asg, tau);
    REQUIRE(plan.session_count() == 1);
    for (const auto& id : plan.split(1).test_ids) CHECK(all_test.insert(id).second);
  }
  CHECK(all_test.size() == 20);
}

TEST_CASE("binding rejects mismatched assignments") {
  const auto s1 = testing::make_session(1, 10, 2, {0, 1}, 2, 1);
  const auto s2 = testing::make_session(2, 10, 2, {0, 1}, 2, 2);
  CHECK_THROWS_AS(bind_folds({slcv_partition(s1, 5, 1), slcv_partition(s2, 4, 1)}, 1), ConfigError);
  CHECK_THROWS_AS(bind_folds({slcv_partition(s1, 5, 1), ilcv_partition(s2, 5, 1)}, 1), ConfigError);
  CHECK_THROWS_AS(bind_folds({slcv_partition(s1, 5, 1)}, 6), ConfigError);
  CHECK_THROWS_AS(bind_folds({slcv_partition(s1, 5, 1)}, 0), ConfigError);
  CHECK_THROWS_AS(bind_folds({}, 1), ConfigError);
}

TEST_CASE("classes missing from a training split are reported") {
  std::vector<Sample> samples{{"a", "p1", 0, Eigen::VectorXd::Zero(1)},
                              {"b", "p1", 0, Eigen::VectorXd::Zero(1)},
                              {"c", "p2", 1, Eigen::VectorXd::Zero(1)}};
  SessionDataset s(1, "s", samples, {0, 1});
  SessionSplit split{{"a", "b"}, {"c"}};
  CHECK(classes_missing_from_training(s, split) == ClassSet{1});
  SessionSplit full{{"a", "c"}, {"b"}};
  CHECK(classes_missing_from_training(s, full).empty());
}
