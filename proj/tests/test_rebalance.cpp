#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <string>
#include <vector>

#include "tailforge/dataset.hpp"
#include "tailforge/errors.hpp"
#include "tailforge/rebalance.hpp"
#include "tailforge/rng.hpp"
#include "tailforge/trainer.hpp"

using namespace tailforge;
using namespace tailforge::decouple;

namespace {
double row_norm(const std::vector<float>& w, int d, int row) {
    double s = 0.0;
    for (int j = 0; j < d; ++j) {
        double v = w[static_cast<std::size_t>(row) * d + j];
        s += v * v;
    }
    return std::sqrt(s);
}

synth::GeneratedData small_data() {
    synth::DatasetSpec spec;
    spec.num_classes = 4;
    spec.max_count = 24;
    spec.imbalance_ratio = 8.0;
    spec.base_resolution = 12;
    spec.noise_rate = 0.1;
    spec.seed = 3;
    spec.val_per_class = 4;
    return synth::gen_dataset(spec);
}

train::TrainerConfig small_tcfg() {
    train::TrainerConfig tcfg;
    tcfg.arch.channels = {4, 8};
    tcfg.arch.d_emb = 6;
    tcfg.optim.batch_size = 16;
    tcfg.optim.total_epochs = 6;
    tcfg.optim.warmup_epochs = 1;
    tcfg.optim.decay_epochs = {4};
    tcfg.augment_enabled = false;
    return tcfg;
}
}  // namespace

TEST_CASE("tau_normalize matches the single-row closed form") {
    std::vector<float> w{3.0f, 4.0f};  // one class, norm 5
    auto out = tau_normalize(w, 1, 2, 0.5);
    CHECK(out[0] == doctest::Approx(3.0 / std::sqrt(5.0)).epsilon(1e-7));
    CHECK(out[1] == doctest::Approx(4.0 / std::sqrt(5.0)).epsilon(1e-7));
    CHECK(out[0] == doctest::Approx(1.3416407864998738).epsilon(1e-7));
    CHECK(out[1] == doctest::Approx(1.7888543819998317).epsilon(1e-7));
}

TEST_CASE("tau zero returns the weights bitwise") {
    Rng rng(1);
    std::vector<float> w(5 * 7);
    for (float& v : w) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    auto out = tau_normalize(w, 5, 7, 0.0);
    CHECK(out == w);
}

TEST_CASE("tau one leaves every row with unit norm") {
    Rng rng(2);
    std::vector<double> w(6 * 9);
    for (double& v : w) v = rng.uniform(-2.0, 2.0);
    auto out = tau_normalize(w, 6, 9, 1.0);
    for (int i = 0; i < 6; ++i) {
        double s = 0.0;
        for (int j = 0; j < 9; ++j) s += out[i * 9 + j] * out[i * 9 + j];
        CHECK(std::abs(std::sqrt(s) - 1.0) <= 1e-12);
    }
}

TEST_CASE("tau normalization obeys the norm-ratio power law") {
    Rng rng(3);
    const int C = 5, d = 8;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> w(C * d);
        for (double& v : w) v = rng.uniform(-2.0, 2.0);
        double tau = rng.uniform(0.1, 1.5);
        auto out = tau_normalize(w, C, d, tau);
        auto norm_of = [&](const std::vector<double>& m, int row) {
            double s = 0.0;
            for (int j = 0; j < d; ++j) s += m[row * d + j] * m[row * d + j];
            return std::sqrt(s);
        };
        for (int i = 1; i < C; ++i) {
            double lhs = norm_of(out, i) / norm_of(out, 0);
            double rhs = std::pow(norm_of(w, i) / norm_of(w, 0), 1.0 - tau);
            CHECK(std::abs(lhs - rhs) <= 1e-9);
        }
    }
}

TEST_CASE("tau_normalize rejects zero rows and bad shapes") {
    std::vector<float> w(2 * 3, 0.0f);
    w[0] = 1.0f;  // row 0 fine, row 1 all zero
    try {
        tau_normalize(w, 2, 3, 0.5);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("class 1") != std::string::npos);
    }
    CHECK_THROWS_AS(tau_normalize(w, 2, 4, 0.5), ConfigError);
}

TEST_CASE("equal-norm rows shrink by a common factor") {
    // Rows (1,0) and (0,-1): both norm 1, any tau keeps them unchanged.
    std::vector<double> w{1.0, 0.0, 0.0, -1.0};
    auto out = tau_normalize(w, 2, 2, 0.7);
    for (std::size_t i = 0; i < w.size(); ++i) CHECK(out[i] == doctest::Approx(w[i]).epsilon(1e-14));
}

TEST_CASE("rebalance config validation") {
    RebalanceConfig ok;
    ok.validate();
    RebalanceConfig bad = ok;
    bad.tau = 2.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = ok;
    bad.subset_per_class = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = ok;
    bad.tau_grid = {0.0, 3.0};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK(scope_from_string("classifier_only") == Scope::classifier_only);
    CHECK(scope_from_string("full_network") == Scope::full_network);
    CHECK_THROWS_AS(scope_from_string("banana"), ConfigError);
}

TEST_CASE("grid search evaluates every point and picks the mcer minimizer") {
    auto data = small_data();
    auto tcfg = small_tcfg();
    auto view = train::full_view(data.train);
    auto trained = train::train_model(data.train, view, tcfg, 5);
    std::vector<int> counts = train::view_class_counts(view, data.train.num_classes);

    std::vector<double> grid{0.0, 0.5, 1.0};
    auto result = grid_search_tau(trained.params, data.val, grid, counts);
    REQUIRE(result.curve.size() == 3);
    for (std::size_t i = 0; i < grid.size(); ++i) CHECK(result.curve[i].tau == grid[i]);

    // The winner is re-derivable from the curve: min mcer, ties toward smaller tau.
    double best = result.curve[0].tau;
    double best_mcer = result.curve[0].mcer;
    for (const auto& pt : result.curve) {
        if (pt.mcer < best_mcer) {
            best_mcer = pt.mcer;
            best = pt.tau;
        }
    }
    CHECK(result.best_tau == best);

    // tau = 0 reproduces the plain evaluation of the unnormalized model.
    auto plain = train::evaluate_model(trained.params, data.val, counts);
    CHECK(result.curve[0].mcer == doctest::Approx(plain.mean_class_error_rate).epsilon(1e-15));
    CHECK(result.curve[0].top1 == doctest::Approx(plain.top1_accuracy).epsilon(1e-15));

    // A singleton grid trivially returns its only point.
    auto single = grid_search_tau(trained.params, data.val, {0.3}, counts);
    CHECK(single.best_tau == 0.3);
    REQUIRE(single.curve.size() == 1);
}

TEST_CASE("retrain_classifier keeps the backbone bitwise frozen") {
    auto data = small_data();
    auto tcfg = small_tcfg();
    auto view = train::full_view(data.train);
    auto trained = train::train_model(data.train, view, tcfg, 6);

    auto crt = retrain_classifier(trained.params, data.train, view, tcfg, 3, true, 7);
    for (std::size_t l = 0; l < trained.params.conv.size(); ++l) {
        CHECK(crt.conv[l].kernels == trained.params.conv[l].kernels);
        CHECK(crt.conv[l].bias == trained.params.conv[l].bias);
    }
    CHECK(crt.embed_w == trained.params.embed_w);
    CHECK(crt.embed_b == trained.params.embed_b);
    CHECK(crt.bn_gamma == trained.params.bn_gamma);
    CHECK(crt.bn_beta == trained.params.bn_beta);
    CHECK(crt.bn_running_mean == trained.params.bn_running_mean);
    CHECK(crt.bn_running_var == trained.params.bn_running_var);
    CHECK(crt.classifier_w != trained.params.classifier_w);

    // Zero epochs without reinit is the identity on the classifier too.
    auto noop = retrain_classifier(trained.params, data.train, view, tcfg, 0, false, 7);
    CHECK(noop.classifier_w == trained.params.classifier_w);
}

TEST_CASE("build_balanced_subset takes the top-m by own-label probability") {
    // Two classes; probabilities crafted by hand. View keeps positions 0..4.
    train::TrainView view;
    view.indices = {0, 1, 2, 3, 4};
    view.labels = {0, 0, 0, 1, 1};
    const int C = 2;
    // probs laid out n x C (own-label prob is what matters).
    std::vector<double> probs{
        0.9, 0.1,   // pos 0, label 0 -> 0.9
        0.6, 0.4,   // pos 1, label 0 -> 0.6
        0.8, 0.2,   // pos 2, label 0 -> 0.8
        0.3, 0.7,   // pos 3, label 1 -> 0.7
        0.5, 0.5,   // pos 4, label 1 -> 0.5
    };
    auto subset1 = build_balanced_subset(view, probs, C, 1);
    REQUIRE(subset1.size() == 2);
    CHECK(subset1[0] == 0);  // class 0 argmax at 0.9
    CHECK(subset1[1] == 3);  // class 1 argmax at 0.7

    auto subset2 = build_balanced_subset(view, probs, C, 2);
    REQUIRE(subset2.size() == 4);

    // m beyond every class count keeps all survivors.
    auto all = build_balanced_subset(view, probs, C, 100);
    CHECK(all.size() == view.indices.size());

    // Dropped positions never appear even with huge m.
    train::TrainView pruned = view;
    pruned.indices = {0, 2, 3};
    auto survivors = build_balanced_subset(pruned, probs, C, 100);
    CHECK(survivors.size() == 3);
    for (int pos : survivors) {
        CHECK((pos == 0 || pos == 2 || pos == 3));
    }
}

TEST_CASE("subset ties prefer the lower position") {
    train::TrainView view;
    view.indices = {0, 1, 2};
    view.labels = {0, 0, 0};
    std::vector<double> probs{
        0.5, 0.5,
        0.5, 0.5,
        0.5, 0.5,
    };
    auto subset = build_balanced_subset(view, probs, 2, 2);
    REQUIRE(subset.size() == 2);
    CHECK(subset[0] == 0);
    CHECK(subset[1] == 1);
}

TEST_CASE("finetune_on_subset honors scope and zero epochs") {
    auto data = small_data();
    auto tcfg = small_tcfg();
    auto view = train::full_view(data.train);
    auto trained = train::train_model(data.train, view, tcfg, 8);
    auto probs = train::score_dataset(trained.params, data.train);
    auto subset = build_balanced_subset(view, probs, data.train.num_classes, 3);
    REQUIRE(!subset.empty());

    auto tuned = finetune_on_subset(trained.params, data.train, view, subset,
                                    Scope::classifier_only, tcfg, 2, 9);
    for (std::size_t l = 0; l < trained.params.conv.size(); ++l) {
        CHECK(tuned.conv[l].kernels == trained.params.conv[l].kernels);
    }
    CHECK(tuned.embed_w == trained.params.embed_w);
    CHECK(tuned.bn_gamma == trained.params.bn_gamma);
    CHECK(tuned.classifier_w != trained.params.classifier_w);

    auto frozen = finetune_on_subset(trained.params, data.train, view, subset,
                                     Scope::classifier_only, tcfg, 0, 9);
    CHECK(frozen.classifier_w == trained.params.classifier_w);

    auto full = finetune_on_subset(trained.params, data.train, view, subset,
                                   Scope::full_network, tcfg, 2, 9);
    CHECK(full.conv[0].kernels != trained.params.conv[0].kernels);
}

TEST_CASE("tau normalization keeps row-norm ordering flat enough to matter") {
    // Sanity link to the training stack: the trained head on an imbalanced set
    // has unequal row norms, and tau=1 wipes that signal.
    auto data = small_data();
    auto tcfg = small_tcfg();
    auto view = train::full_view(data.train);
    auto trained = train::train_model(data.train, view, tcfg, 10);
    const int d = trained.params.d_emb();
    const int C = trained.params.num_classes;
    double spread_before = 0.0, spread_after = 0.0;
    auto normed = tau_normalize(trained.params.classifier_w, C, d, 1.0);
    double min_b = 1e300, max_b = 0.0, min_a = 1e300, max_a = 0.0;
    for (int c = 0; c < C; ++c) {
        double nb = row_norm(trained.params.classifier_w, d, c);
        double na = row_norm(normed, d, c);
        min_b = std::min(min_b, nb);
        max_b = std::max(max_b, nb);
        min_a = std::min(min_a, na);
        max_a = std::max(max_a, na);
    }
    spread_before = max_b / min_b;
    spread_after = max_a / min_a;
    CHECK(spread_after < spread_before);
    CHECK(spread_after == doctest::Approx(1.0).epsilon(1e-9));
}
