#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "harmonia/calculus.hpp"

using namespace harmonia;

namespace {

Context plain_context(double scale = 8.0, int k = 1) {
    Context ctx;
    ctx.id = "ctx";
    ctx.default_scale = scale;
    ctx.selection_size = k;
    return ctx;
}

// Independent oracle: per-pair cosine sum evaluated without the library's
// bookkeeping.
double brute_force_hv(const Composition& c, const Expression& e, const Context& ctx) {
    if (c.model.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& ch : c.model) {
        const Characteristic* ref = e.model.find(ch.key);
        if (ref == nullptr) continue;
        const double theta =
            std::numbers::pi *
            std::min(std::abs(ch.value - ref->value) / ctx.scale_for(ch.key), 1.0);
        sum += std::cos(theta);
    }
    return std::clamp(sum / static_cast<double>(c.model.size()), -1.0, 1.0);
}

Composition comp(std::string id, std::initializer_list<Characteristic> cs) {
    Composition c;
    c.id = std::move(id);
    c.model = CharacteristicModel(cs);
    return c;
}

} // namespace

TEST(harmonic_value, fully_conforming_composition_scores_one) {
    const Context ctx = plain_context();
    Expression e{"e", {make_characteristic("a", 1.0), make_characteristic("b", 2.0)}};
    const auto c = comp("c", {make_characteristic("a", 1.0), make_characteristic("b", 2.0)});
    const auto hv = harmonic_value(c, e, ctx);
    EXPECT_DOUBLE_EQ(hv.value, 1.0);
    EXPECT_EQ(hv.matched, 2);
    EXPECT_EQ(hv.n, 2);
}

TEST(harmonic_value, zero_theta_pair_contributes_one) {
    const Context ctx = plain_context();
    Expression e{"e", {make_characteristic("a", 3.0)}};
    const auto c = comp("c", {make_characteristic("a", 3.0)});
    const auto pairs = pair_contributions(c, e, ctx);
    ASSERT_EQ(pairs.size(), 1u);
    EXPECT_DOUBLE_EQ(pairs[0].raw, 1.0);
    EXPECT_DOUBLE_EQ(pairs[0].theta, 0.0);
}

TEST(harmonic_value, empty_model_scores_zero) {
    const Context ctx = plain_context();
    Expression e{"e", {make_characteristic("a", 1.0)}};
    Composition c;
    c.id = "placeholder";
    const auto hv = harmonic_value(c, e, ctx);
    EXPECT_EQ(hv.value, 0.0);
    EXPECT_EQ(hv.n, 0);
}

TEST(harmonic_value, opposite_pair_cancels_conforming_pair) {
    const Context ctx = plain_context(8.0);
    Expression e{"e", {make_characteristic("a", 0.0), make_characteristic("b", 0.0)}};
    // theta = 0 on a, theta = pi on b (delta >= scale)
    const auto c = comp("c", {make_characteristic("a", 0.0), make_characteristic("b", 9.0)});
    const auto hv = harmonic_value(c, e, ctx);
    EXPECT_NEAR(hv.value, 0.0, 1e-15);
    EXPECT_NEAR(hv.value, brute_force_hv(c, e, ctx), 1e-15);
}

TEST(harmonic_value, unmatched_characteristics_contribute_zero) {
    const Context ctx = plain_context();
    Expression e{"e", {make_characteristic("a", 1.0)}};
    const auto c = comp("c", {make_characteristic("a", 1.0), make_characteristic("x", 9.0)});
    EXPECT_DOUBLE_EQ(harmonic_value(c, e, ctx).value, 0.5);
}

TEST(harmonic_value, facilitator_amplifies_its_target) {
    const Context ctx = plain_context(8.0);
    Expression e{"e", {make_characteristic("a", 2.0)}};
    Characteristic fac = make_characteristic("f", 0.0);
    fac.role = Role::Facilitator;
    fac.role_target = "a";
    fac.strength = 0.5;
    const auto plain = comp("p", {make_characteristic("a", 0.0)});
    auto boosted = comp("b", {make_characteristic("a", 0.0), fac});
    const double base = std::cos(std::numbers::pi * 0.25);
    EXPECT_NEAR(harmonic_value(plain, e, ctx).value, base, 1e-15);
    EXPECT_NEAR(harmonic_value(boosted, e, ctx).value, base * 1.5 / 2.0, 1e-15);
}

TEST(harmonic_value, facilitator_leaves_negative_target_alone) {
    const Context ctx = plain_context(8.0);
    Expression e{"e", {make_characteristic("a", 9.0)}};
    Characteristic fac = make_characteristic("f", 0.0);
    fac.role = Role::Facilitator;
    fac.role_target = "a";
    fac.strength = 2.0;
    const auto c = comp("c", {make_characteristic("a", 0.0), fac});
    const auto pairs = pair_contributions(c, e, ctx);
    ASSERT_EQ(pairs.size(), 1u);
    EXPECT_DOUBLE_EQ(pairs[0].adjusted, pairs[0].raw); // raw is cos(pi) = -1
}

TEST(harmonic_value, inhibitor_suppresses_and_saturates_at_zero) {
    const Context ctx = plain_context();
    Expression e{"e", {make_characteristic("a", 1.0)}};
    Characteristic weak = make_characteristic("i", 0.0);
    weak.role = Role::Inhibitor;
    weak.role_target = "a";
    weak.strength = 0.25;
    Characteristic strong = weak;
    strong.strength = 3.0;
    const auto weakly = comp("w", {make_characteristic("a", 1.0), weak});
    const auto strongly = comp("s", {make_characteristic("a", 1.0), strong});
    EXPECT_NEAR(harmonic_value(weakly, e, ctx).value, 0.75 / 2.0, 1e-15);
    EXPECT_NEAR(harmonic_value(strongly, e, ctx).value, 0.0, 1e-15);
}

TEST(harmonic_value, bounded_on_random_fixtures_and_matches_oracle_without_roles) {
    std::mt19937_64 rng(20240811);
    std::uniform_real_distribution<double> values(-30.0, 30.0);
    std::uniform_int_distribution<int> sizes(0, 6);
    const Context ctx = plain_context(7.0);
    for (int i = 0; i < 10000; ++i) {
        Composition c;
        c.id = "c";
        Expression e{"e", {}};
        const int n = sizes(rng);
        for (int k = 0; k < n; ++k) {
            const std::string key = "k" + std::to_string(k);
            c.model.add(make_characteristic(key, values(rng)));
            if (k % 3 != 2) e.model.add(make_characteristic(key, values(rng)));
        }
        const auto hv = harmonic_value(c, e, ctx);
        EXPECT_GE(hv.value, -1.0);
        EXPECT_LE(hv.value, 1.0);
        EXPECT_NEAR(hv.value, brute_force_hv(c, e, ctx), 1e-12);
    }
}

TEST(harmonic_value, equals_one_exactly_when_fully_conforming) {
    // Without facilitators, HV = 1 iff every pair is theta = 0, nothing is
    // suppressed, and every characteristic matched.
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> sizes(1, 5);
    std::uniform_int_distribution<int> coin(0, 1);
    std::uniform_real_distribution<double> values(-5.0, 5.0);
    const Context ctx = plain_context(4.0);
    for (int i = 0; i < 2000; ++i) {
        Composition c;
        c.id = "c";
        Expression e{"e", {}};
        const int n = sizes(rng);
        bool all_conforming = true;
        for (int k = 0; k < n; ++k) {
            const std::string key = "k" + std::to_string(k);
            const double v = values(rng);
            c.model.add(make_characteristic(key, v));
            if (coin(rng) == 0) {
                e.model.add(make_characteristic(key, v));
            } else {
                all_conforming = false;
                if (coin(rng) == 0) e.model.add(make_characteristic(key, v + 1.0));
            }
        }
        EXPECT_EQ(harmonic_value(c, e, ctx).value == 1.0, all_conforming);
    }
}

TEST(harmonic_significance, perfect_single_participant_is_one) {
    const Context ctx = plain_context();
    Expression e{"e", {}};
    Composition c;
    c.id = "c";
    for (int k = 0; k < 4; ++k) {
        const std::string key = "k" + std::to_string(k);
        e.model.add(make_characteristic(key, 1.0));
        c.model.add(make_characteristic(key, 1.0));
    }
    const auto s = harmonic_significance(c, e, ctx, {c});
    EXPECT_DOUBLE_EQ(s.value, 1.0);
    EXPECT_EQ(s.n_conforming, 4);
    EXPECT_EQ(s.m, 4);
}

TEST(harmonic_significance, diluted_by_other_participants) {
    const Context ctx = plain_context();
    Expression e{"e", {}};
    Composition c;
    c.id = "c";
    for (int k = 0; k < 4; ++k) {
        const std::string key = "k" + std::to_string(k);
        e.model.add(make_characteristic(key, 1.0));
        c.model.add(make_characteristic(key, 1.0));
    }
    Composition other;
    other.id = "other";
    for (int k = 0; k < 4; ++k)
        other.model.add(make_characteristic("x" + std::to_string(k), 0.0));
    const auto s = harmonic_significance(c, e, ctx, {c, other});
    EXPECT_DOUBLE_EQ(s.value, 0.5);
    EXPECT_EQ(s.m, 8);
}

TEST(harmonic_significance, enrichment_with_conforming_pair_increases_it) {
    const Context ctx = plain_context();
    Expression e{"e", {make_characteristic("a", 1.0), make_characteristic("b", 5.0)}};
    auto c = comp("c", {make_characteristic("a", 1.0), make_characteristic("b", 4.0)});
    const double before = harmonic_significance(c, e, ctx, {c}).value;
    ASSERT_GT(harmonic_value(c, e, ctx).value, 0.0);
    Expression e2 = e;
    e2.model.add(make_characteristic("new", 7.0));
    Composition c2 = c;
    c2.model.add(make_characteristic("new", 7.0));
    const double after = harmonic_significance(c2, e2, ctx, {c2}).value;
    EXPECT_GT(after, before);
}

TEST(harmonic_significance, empty_participants_throw) {
    const Context ctx = plain_context();
    Expression e{"e", {make_characteristic("a", 1.0)}};
    Composition placeholder;
    placeholder.id = "p";
    EXPECT_THROW(harmonic_significance(placeholder, e, ctx, {placeholder}), EmptyParticipants);
}

TEST(select_compositions, significance_breaks_hv_ties) {
    const Context ctx = plain_context(8.0, 1);
    // Both candidates conform perfectly (HV 1); the richer one carries more
    // conforming characteristics and wins on significance.
    Expression e{"e", {make_characteristic("a", 0.0), make_characteristic("b", 0.0)}};
    const auto rich = comp("rich", {make_characteristic("a", 0.0), make_characteristic("b", 0.0)});
    const auto thin = comp("thin", {make_characteristic("a", 0.0)});
    const auto hv_rich = harmonic_value(rich, e, ctx).value;
    const auto hv_thin = harmonic_value(thin, e, ctx).value;
    ASSERT_DOUBLE_EQ(hv_rich, hv_thin);
    const auto sig_rich = harmonic_significance(rich, e, ctx, {thin, rich}).value;
    const auto sig_thin = harmonic_significance(thin, e, ctx, {thin, rich}).value;
    ASSERT_GT(sig_rich, sig_thin);
    const auto selected = select_compositions({thin, rich}, e, ctx);
    ASSERT_EQ(selected.size(), 1u);
    EXPECT_EQ(selected[0].id, "rich");
}

TEST(select_compositions, oversized_k_returns_all_sorted) {
    const Context ctx = plain_context(8.0, 10);
    Expression e{"e", {make_characteristic("a", 0.0)}};
    const auto good = comp("good", {make_characteristic("a", 0.0)});
    const auto bad = comp("bad", {make_characteristic("a", 9.0)});
    const auto selected = select_compositions({bad, good}, e, ctx);
    ASSERT_EQ(selected.size(), 2u);
    EXPECT_EQ(selected[0].id, "good");
    EXPECT_EQ(selected[1].id, "bad");
}

TEST(select_compositions, invariant_under_input_permutation) {
    std::mt19937_64 rng(4321);
    std::uniform_real_distribution<double> values(-6.0, 6.0);
    const Context ctx = plain_context(5.0, 2);
    Expression e{"e", {make_characteristic("a", 0.0), make_characteristic("b", 0.0)}};
    for (int round = 0; round < 200; ++round) {
        std::vector<Composition> candidates;
        for (int i = 0; i < 6; ++i)
            candidates.push_back(comp("c" + std::to_string(i),
                                      {make_characteristic("a", values(rng)),
                                       make_characteristic("b", values(rng))}));
        const auto baseline = select_compositions(candidates, e, ctx);
        std::shuffle(candidates.begin(), candidates.end(), rng);
        const auto shuffled = select_compositions(candidates, e, ctx);
        ASSERT_EQ(baseline.size(), shuffled.size());
        for (std::size_t i = 0; i < baseline.size(); ++i)
            EXPECT_EQ(baseline[i].id, shuffled[i].id);
    }
}

TEST(harmonic_state, worked_values) {
    EXPECT_DOUBLE_EQ(harmonic_state(std::vector<double>{1.0, 1.0, 1.0}), 1.0);
    EXPECT_NEAR(harmonic_state(std::vector<double>{0.6, 0.8}), std::sqrt(0.5), 1e-12);
    EXPECT_DOUBLE_EQ(harmonic_state(std::vector<double>{-0.5}), 0.5);
}

TEST(harmonic_state, empty_selection_throws) {
    EXPECT_THROW(harmonic_state(std::vector<double>{}), EmptySelection);
}

TEST(harmonic_state, permutation_and_sign_flip_invariant) {
    std::mt19937_64 rng(555);
    std::uniform_real_distribution<double> values(-1.0, 1.0);
    std::uniform_int_distribution<int> sizes(1, 9);
    for (int i = 0; i < 3000; ++i) {
        std::vector<double> xs(sizes(rng));
        for (auto& x : xs) x = values(rng);
        const double base = harmonic_state(xs);
        std::shuffle(xs.begin(), xs.end(), rng);
        xs[i % xs.size()] = -xs[i % xs.size()];
        EXPECT_NEAR(harmonic_state(xs), base, 1e-12);
    }
}

TEST(harmonic_status, averages_per_tick_means) {
    StateHistory h;
    h.add_sample(0, {0.2, 0.2}, 0.2);
    h.add_sample(1, {0.3, 0.5}, 0.4);
    EXPECT_NEAR(harmonic_status(h, 0, 1), 0.3, 1e-15);
    EXPECT_NEAR(harmonic_status(h, 1, 1), 0.4, 1e-15);
}

TEST(harmonic_status, constant_history) {
    StateHistory h;
    for (long t = 0; t < 5; ++t) h.add_sample(t, {0.5}, 0.5);
    EXPECT_DOUBLE_EQ(harmonic_status(h, 0, 4), 0.5);
}

TEST(harmonic_status, empty_interval_throws) {
    StateHistory h;
    h.add_sample(0, {0.5}, 0.5);
    EXPECT_THROW(harmonic_status(h, 3, 7), EmptyInterval);
    EXPECT_THROW(harmonic_status(h, 1, 0), EmptyInterval);
}

TEST(state_history, ticks_must_increase) {
    StateHistory h;
    h.add_sample(3, {0.1}, 0.1);
    EXPECT_THROW(h.add_sample(3, {0.2}, 0.2), Error);
    EXPECT_THROW(h.add_sample(1, {0.2}, 0.2), Error);
}
