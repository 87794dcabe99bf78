#include <gtest/gtest.h>

#include "air/config.hpp"
#include "air/error.hpp"

TEST(Config, DefaultsRoundTrip) {
    const air::ReinforcementConfig d;
    const auto back = air::parse_reinforcement_config(air::to_json(d));
    EXPECT_EQ(air::to_json(back), air::to_json(d));
    EXPECT_EQ(d.top_q, 100u);
    EXPECT_DOUBLE_EQ(d.tau, 0.06);
}

TEST(Config, UnknownKeyListsValidOnes) {
    try {
        air::parse_reinforcement_config({{"tua", 0.1}});
        FAIL();
    } catch (const air::Error& e) {
        EXPECT_EQ(e.code(), air::ErrorCode::Parameter);
        EXPECT_NE(std::string(e.what()).find("tau"), std::string::npos);
    }
}

TEST(Config, LayerGateForms) {
    EXPECT_EQ(air::parse_reinforcement_config({{"layer_gate", "9-12"}}).layer_gate->start, 9);
    EXPECT_EQ(air::parse_reinforcement_config({{"layer_gate", {3, 5}}}).layer_gate->end, 5);
    EXPECT_FALSE(air::parse_reinforcement_config({{"layer_gate", "auto"}}).layer_gate.has_value());
    EXPECT_THROW(air::parse_reinforcement_config({{"layer_gate", "5-3"}}), air::Error);
}

TEST(Config, SetValueAndValidate) {
    air::ReinforcementConfig c;
    air::set_config_value(c, "tau", "0.1");
    air::set_config_value(c, "epsilon", "0.02");
    air::set_config_value(c, "injection_mode", "retained_rows");
    EXPECT_DOUBLE_EQ(c.tau, 0.1);
    EXPECT_DOUBLE_EQ(*c.epsilon, 0.02);
    EXPECT_EQ(c.injection_mode, air::InjectionMode::RetainedRows);
    air::set_config_value(c, "epsilon", "auto");
    EXPECT_FALSE(c.epsilon.has_value());
    EXPECT_THROW(air::set_config_value(c, "top_q", "0"), air::Error);
    EXPECT_THROW(air::set_config_value(c, "nope", "1"), air::Error);
}

TEST(Config, InjectionConfigUsesDepth) {
    air::ReinforcementConfig c;
    const auto inj = c.injection_config(12, air::Activation::SiLU);
    EXPECT_EQ(inj.gate.start, 10);
    EXPECT_EQ(inj.injection_activation, air::Activation::SiLU);
}
