#include <doctest.h>

#include "oracles.hpp"

#include <robustcredit/errors.hpp>
#include <robustcredit/model.hpp>

#include <set>

using namespace robustcredit;

namespace {

nlohmann::json benchmark_json() {
    return nlohmann::json::parse(read_text_file(oracle::config_path("benchmark.json")));
}

}  // namespace

TEST_CASE("enumerate_states orders by default count then mask") {
    auto masks = [](int M) {
        std::vector<unsigned> out;
        for (auto z : enumerate_states(M)) out.push_back(z.mask());
        return out;
    };
    CHECK(masks(1) == std::vector<unsigned>{1, 0});
    CHECK(masks(2) == std::vector<unsigned>{3, 1, 2, 0});
    const auto three = enumerate_states(3);
    CHECK(three.size() == 8);
    CHECK(three.front().mask() == 7);
    CHECK(three.back().mask() == 0);
    CHECK_THROWS_AS(enumerate_states(13), CapacityError);
    CHECK_THROWS_AS(enumerate_states(0), CapacityError);
}

TEST_CASE("enumerate_states is a topological order and covers every mask") {
    for (int M = 1; M <= 8; ++M) {
        const auto states = enumerate_states(M);
        std::set<unsigned> seen;
        for (auto z : states) {
            for (int j = 0; j < M; ++j) {
                if (z.alive(j)) CHECK(seen.count(z.with_default(j).mask()) == 1);
            }
            seen.insert(z.mask());
        }
        CHECK(seen.size() == (1u << M));
    }
}

TEST_CASE("default state bitstrings follow obligor order") {
    const DefaultState z(2);  // obligor 2 defaulted
    CHECK(z.bitstring(2) == "01");
    CHECK(DefaultState::from_bitstring("10").mask() == 1);
    CHECK(DefaultState(0).with_default(1) == z);
    CHECK_THROWS_AS((void)z.with_default(1), DomainError);
    CHECK_THROWS_AS(DefaultState::from_bitstring("0x"), SchemaError);
    CHECK(z.alive_obligors(3) == std::vector<int>{0, 2});
    CHECK(DefaultState(3).all_defaulted(2));
}

TEST_CASE("benchmark configuration loads") {
    const auto m = oracle::benchmark_model();
    CHECK(m.M() == 2);
    CHECK(m.r() == doctest::Approx(0.05));
    CHECK(m.gamma() == doctest::Approx(0.5));
    CHECK(m.T() == doctest::Approx(1.0));
    CHECK(m.grid_steps() == 2000);
    for (int i = 0; i < 2; ++i) {
        CHECK(m.obligor(i).recovery == doctest::Approx(0.7).epsilon(1e-15));
        CHECK(m.obligor(i).coupon == doctest::Approx(0.6));
        CHECK(m.obligor(i).maturity == doctest::Approx(3.0));
    }
    const DefaultState s00(0), s01(2), s10(1);
    CHECK(m.h_ref(0, s00)(0.3) == 0.5);
    CHECK(m.h_ref(0, s01)(0.3) == 1.0);
    CHECK(m.h_ref(1, s10)(0.3) == 1.0);
    CHECK(m.h_rn(0, s00)(0.0) == 1.0);
    CHECK(m.h_rn(0, s01)(0.0) == 2.0);
    CHECK(m.h_rn(1, s10)(0.0) == 2.0);
    CHECK(m.mu(1, s00)(0.9) == 0.5);
    CHECK(m.warnings().empty());
    CHECK_THROWS_AS((void)m.h_ref(1, s01), DomainError);
}

TEST_CASE("contagion form expands to the explicit per-state tables") {
    const auto explicit_model = oracle::benchmark_model();
    const auto contagion = load_model_file(oracle::config_path("benchmark_contagion.json"));
    CHECK(explicit_model.inputs().h_ref == contagion.inputs().h_ref);
    CHECK(explicit_model.inputs().h_rn == contagion.inputs().h_rn);
    CHECK(explicit_model.inputs().mu == contagion.inputs().mu);
}

TEST_CASE("validation rejects out-of-range parameters") {
    auto doc = benchmark_json();
    SUBCASE("gamma above one") {
        doc["gamma"] = 1.2;
        CHECK_THROWS_AS(load_model(doc.dump()), ValidationError);
    }
    SUBCASE("horizon beyond a maturity") {
        doc["T"] = 5.0;
        CHECK_THROWS_AS(load_model(doc.dump()), ValidationError);
    }
    SUBCASE("nonpositive intensity") {
        doc["intensities"]["reference"]["per_state"]["00"]["1"] = 0.0;
        CHECK_THROWS_AS(load_model(doc.dump()), ValidationError);
    }
    SUBCASE("recovery of one") {
        doc["obligors"][0].erase("loss");
        doc["obligors"][0]["recovery"] = 1.0;
        CHECK_THROWS_AS(load_model(doc.dump()), ValidationError);
    }
    SUBCASE("intensity for a defaulted obligor") {
        doc["intensities"]["reference"]["per_state"]["01"]["2"] = 1.0;
        CHECK_THROWS_AS(load_model(doc.dump()), ValidationError);
    }
}

TEST_CASE("schema errors for missing or mistyped fields") {
    auto doc = benchmark_json();
    SUBCASE("missing r") {
        doc.erase("r");
        CHECK_THROWS_AS(load_model(doc.dump()), SchemaError);
    }
    SUBCASE("string gamma") {
        doc["gamma"] = "half";
        CHECK_THROWS_AS(load_model(doc.dump()), SchemaError);
    }
    SUBCASE("missing state entry") {
        doc["intensities"]["penalty_mu"]["per_state"].erase("10");
        CHECK_THROWS_AS(load_model(doc.dump()), SchemaError);
    }
    SUBCASE("both recovery and loss") {
        doc["obligors"][1]["recovery"] = 0.7;
        CHECK_THROWS_AS(load_model(doc.dump()), SchemaError);
    }
    SUBCASE("not json") {
        CHECK_THROWS_AS(load_model("{nope"), SchemaError);
    }
    SUBCASE("too many obligors") {
        doc["M"] = 13;
        CHECK_THROWS_AS(load_model(doc.dump()), CapacityError);
    }
}

TEST_CASE("penalty weights are floored and low coupons only warn") {
    auto doc = benchmark_json();
    doc["intensities"]["penalty_mu"]["per_state"]["00"]["1"] = 1e-9;
    doc["obligors"][0]["coupon"] = 0.01;
    const auto m = load_model(doc.dump());
    CHECK(m.mu(0, DefaultState(0))(0.0) == kMuFloor);
    CHECK(m.warnings().size() == 1);
}

TEST_CASE("knotted functions load and evaluate right-continuously") {
    auto doc = benchmark_json();
    doc["intensities"]["reference"]["per_state"]["00"]["1"] = {{"knots", {0.0, 0.5}}, {"values", {0.4, 0.8}}};
    const auto m = load_model(doc.dump());
    const auto& f = m.h_ref(0, DefaultState(0));
    CHECK(f(0.49) == 0.4);
    CHECK(f(0.5) == 0.8);
    CHECK(f(2.0) == 0.8);
    const auto grid = make_grid(m, 4);
    CHECK(grid.steps() == 4);  // 0.5 is already a node
    const auto grid3 = make_grid(m, 3);
    CHECK(grid3.steps() == 4);
    CHECK(grid3.node(2) == 0.5);
}
