#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "ztafl/dataset.hpp"
#include "ztafl/errors.hpp"
#include "ztafl/metrics.hpp"
#include "ztafl/mlp.hpp"
#include "ztafl/partition.hpp"

using namespace ztafl;

TEST_CASE("synthetic generation is seed-deterministic") {
    const Dataset a = generate_synthetic(300, 40, 6, 42);
    const Dataset b = generate_synthetic(300, 40, 6, 42);
    CHECK(a.X.data() == b.X.data());
    CHECK(a.y == b.y);
    const Dataset c = generate_synthetic(300, 40, 6, 43);
    CHECK(a.X.data() != c.X.data());
}

TEST_CASE("synthetic class counts are balanced within one sample") {
    const Dataset ds = generate_synthetic(301, 40, 6, 7);
    std::vector<int> counts(6, 0);
    for (int y : ds.y) counts[y]++;
    for (int c = 0; c < 6; ++c) {
        CHECK(counts[c] >= 301 / 6);
        CHECK(counts[c] <= 301 / 6 + 1);
    }
}

TEST_CASE("a linear classifier separates a two-class shift-2 instance") {
    const Dataset ds = generate_synthetic(400, 10, 2, 11);
    Rng rng(3);
    MlpModel m = init_mlp({10, 2}, rng);
    const MlpModel t = local_train(m, ds.X, ds.y, {5, 32, 1e-2}, 5);
    CHECK(accuracy(t, ds.X, ds.y) > 0.9);
}

TEST_CASE("rejects degenerate class counts") {
    CHECK_THROWS_AS(generate_synthetic(100, 40, 1, 1), InvalidInputError);
    CHECK_THROWS_AS(generate_synthetic(10, 40, 6, 1), InvalidInputError);
}

TEST_CASE("minmax maps the training bounds to [0,1]") {
    Dataset ds;
    ds.X = Matrix(3, 1);
    ds.X(0, 0) = 2.0;
    ds.X(1, 0) = 4.0;
    ds.X(2, 0) = 6.0;
    ds.y = {0, 0, 0};
    ds.class_names = {"a"};
    const NormalizationMap map = minmax_fit(ds);
    minmax_apply(map, ds);
    CHECK(ds.X(0, 0) == doctest::Approx(0.0));
    CHECK(ds.X(1, 0) == doctest::Approx(0.5));
    CHECK(ds.X(2, 0) == doctest::Approx(1.0));
}

TEST_CASE("constant columns map to zero") {
    Dataset ds;
    ds.X = Matrix(3, 1, 7.5);
    ds.y = {0, 0, 0};
    ds.class_names = {"a"};
    const NormalizationMap map = minmax_fit(ds);
    minmax_apply(map, ds);
    for (std::size_t i = 0; i < 3; ++i) CHECK(ds.X(i, 0) == 0.0);
}

TEST_CASE("values outside the fitted range are preserved, not clipped") {
    Dataset train;
    train.X = Matrix(2, 1);
    train.X(0, 0) = 0.0;
    train.X(1, 0) = 10.0;
    train.y = {0, 0};
    train.class_names = {"a"};
    const NormalizationMap map = minmax_fit(train);

    Dataset test;
    test.X = Matrix(1, 1);
    test.X(0, 0) = 15.0;  // outside [0, 10]
    test.y = {0};
    test.class_names = {"a"};
    minmax_apply(map, test);
    CHECK(test.X(0, 0) == doctest::Approx(1.5));
}

TEST_CASE("split of 100 balanced two-class samples is exactly 70/15/15") {
    const Dataset ds = generate_synthetic(100, 8, 2, 21);
    const SplitResult s = split_dataset(ds, 5);
    CHECK(s.train.size() == 70);
    CHECK(s.val.size() == 15);
    CHECK(s.test.size() == 15);
}

TEST_CASE("split is stratified within one sample per class") {
    const Dataset ds = generate_synthetic(233, 12, 4, 9);
    const SplitResult s = split_dataset(ds, 6);
    std::vector<int> total(4, 0), train_c(4, 0), val_c(4, 0), test_c(4, 0);
    for (int y : ds.y) total[y]++;
    for (int y : s.train.y) train_c[y]++;
    for (int y : s.val.y) val_c[y]++;
    for (int y : s.test.y) test_c[y]++;
    for (int c = 0; c < 4; ++c) {
        CHECK(std::abs(train_c[c] - 0.70 * total[c]) <= 1.0);
        CHECK(std::abs(val_c[c] - 0.15 * total[c]) <= 1.0);
        CHECK(std::abs(test_c[c] - 0.15 * total[c]) <= 1.0);
        CHECK(train_c[c] + val_c[c] + test_c[c] == total[c]);
    }
}

TEST_CASE("split rejects classes with fewer than three samples") {
    Dataset ds;
    ds.X = Matrix(5, 2);
    ds.y = {0, 0, 0, 1, 1};
    ds.class_names = {"a", "b"};
    CHECK_THROWS_AS(split_dataset(ds, 1), InvalidInputError);
}

TEST_CASE("degenerate-skew partition behaves like IID") {
    const Dataset ds = generate_synthetic(1200, 20, 4, 31);
    PartitionSpec spec;
    spec.n_agents = 6;
    spec.classes_per_agent = 4;
    spec.min_samples = 100;
    spec.max_samples = 100;
    const auto shards = partition_noniid(ds, spec, 3);
    CHECK(shards.size() == 6);
    for (const auto& sh : shards) {
        CHECK(sh.train.size() + sh.holdout.size() == 100);
        std::set<int> classes(sh.train.y.begin(), sh.train.y.end());
        CHECK(classes.size() == 4);  // every class present
    }
}

TEST_CASE("single-class skew yields single-class shards") {
    const Dataset ds = generate_synthetic(1200, 20, 4, 33);
    PartitionSpec spec;
    spec.n_agents = 4;
    spec.classes_per_agent = 1;
    spec.min_samples = 50;
    spec.max_samples = 120;
    const auto shards = partition_noniid(ds, spec, 4);
    for (const auto& sh : shards) {
        std::set<int> classes(sh.train.y.begin(), sh.train.y.end());
        classes.insert(sh.holdout.y.begin(), sh.holdout.y.end());
        CHECK(classes.size() == 1);
        CHECK(*classes.begin() == sh.classes.front());
    }
}

TEST_CASE("shard sizes respect the power-law bounds") {
    const Dataset ds = generate_synthetic(4000, 20, 4, 35);
    PartitionSpec spec;
    spec.n_agents = 12;
    spec.classes_per_agent = 2;
    spec.min_samples = 50;
    spec.max_samples = 200;
    const auto shards = partition_noniid(ds, spec, 5);
    for (const auto& sh : shards) {
        const std::size_t total = sh.train.size() + sh.holdout.size();
        CHECK(total >= 50);
        CHECK(total <= 200);
        CHECK(sh.holdout.size() == total / 10);
    }
}

TEST_CASE("shards only contain the drawn classes") {
    const Dataset ds = generate_synthetic(2000, 20, 5, 37);
    PartitionSpec spec;
    spec.n_agents = 8;
    spec.classes_per_agent = 2;
    spec.min_samples = 50;
    spec.max_samples = 150;
    const auto shards = partition_noniid(ds, spec, 6);
    for (const auto& sh : shards) {
        const std::set<int> allowed(sh.classes.begin(), sh.classes.end());
        for (int y : sh.train.y) CHECK(allowed.count(y) == 1);
        for (int y : sh.holdout.y) CHECK(allowed.count(y) == 1);
    }
}

TEST_CASE("power-law sampler respects its bounds") {
    Rng rng(40);
    for (int i = 0; i < 2000; ++i) {
        const std::size_t s = sample_power_law(1.5, 50, 500, rng.uniform());
        CHECK(s >= 50);
        CHECK(s <= 500);
    }
    CHECK(sample_power_law(1.5, 50, 500, 0.0) == 50);
    CHECK(sample_power_law(1.5, 50, 500, 1.0 - 1e-12) == 500);
}

TEST_CASE("feature-skew groups zero out foreign features") {
    const Dataset ds = generate_synthetic(800, 12, 3, 39);
    PartitionSpec spec;
    spec.n_agents = 4;
    spec.classes_per_agent = 3;
    spec.min_samples = 50;
    spec.max_samples = 80;
    spec.feature_skew_groups = {{0, 1, 2, 3}, {4, 5, 6, 7}, {8, 9, 10, 11}};
    const auto shards = partition_noniid(ds, spec, 7);
    // Agent 1 keeps group 1 only.
    const auto& sh = shards[1];
    for (std::size_t i = 0; i < sh.train.size(); ++i) {
        for (int j : {0, 1, 2, 3, 8, 9, 10, 11}) CHECK(sh.train.X(i, j) == 0.0);
    }
}

TEST_CASE("csv loads a well-formed file and reports bad rows") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "ztafl_csv_test";
    fs::create_directories(dir);
    const std::string path = (dir / "ok.csv").string();
    {
        std::ofstream out(path);
        out << "f0,f1,label\n1.5,2.5,attack\n0.5,0.25,benign\n-1,3,attack\n";
    }
    const Dataset ds = load_csv(path, "label");
    CHECK(ds.size() == 3);
    CHECK(ds.dim() == 2);
    CHECK(ds.class_names == std::vector<std::string>{"attack", "benign"});
    CHECK(ds.y == std::vector<int>{0, 1, 0});
    CHECK(ds.X(0, 0) == doctest::Approx(1.5));

    const std::string bad = (dir / "bad.csv").string();
    {
        std::ofstream out(bad);
        out << "f0,f1,label\n1.0,2.0,a\n1.0,oops,b\n";
    }
    try {
        load_csv(bad, "label");
        FAIL("expected an error");
    } catch (const InvalidInputError& e) {
        CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    }

    CHECK_THROWS_AS(load_csv((dir / "missing.csv").string(), "label"), InvalidInputError);
    CHECK_THROWS_AS(load_csv(path, "nope"), InvalidInputError);
}

TEST_CASE("csv write-then-load round trip") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "ztafl_csv_test";
    fs::create_directories(dir);
    const Dataset ds = generate_synthetic(50, 6, 2, 77);
    const std::string path = (dir / "roundtrip.csv").string();
    write_csv(path, ds, "label");
    const Dataset back = load_csv(path, "label");
    REQUIRE(back.size() == ds.size());
    REQUIRE(back.dim() == ds.dim());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        // Class ids are assigned by first appearance, so compare by name.
        CHECK(back.class_names[back.y[i]] == ds.class_names[ds.y[i]]);
        for (std::size_t j = 0; j < ds.dim(); ++j)
            CHECK(back.X(i, j) == doctest::Approx(ds.X(i, j)).epsilon(1e-6));
    }
}

TEST_CASE("partition shards are index-disjoint by feature content") {
    // Disjointness is by sample index; absent pool exhaustion no row is
    // handed to two agents. Tag rows with a unique feature value to verify.
    Dataset ds = generate_synthetic(2000, 8, 4, 41);
    for (std::size_t i = 0; i < ds.size(); ++i) ds.X(i, 0) = static_cast<double>(i);
    PartitionSpec spec;
    spec.n_agents = 8;
    spec.classes_per_agent = 2;
    spec.min_samples = 50;
    spec.max_samples = 120;
    const auto shards = partition_noniid(ds, spec, 8);
    std::set<double> seen;
    for (const auto& sh : shards) {
        CHECK_FALSE(sh.replacement_used);
        for (std::size_t i = 0; i < sh.train.size(); ++i) {
            CHECK(seen.insert(sh.train.X(i, 0)).second);
        }
        for (std::size_t i = 0; i < sh.holdout.size(); ++i)
            CHECK(seen.insert(sh.holdout.X(i, 0)).second);
    }
}
