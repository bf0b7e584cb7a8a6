#include <gtest/gtest.h>
#include <torch/torch.h>

#include "gradcheck.hpp"

namespace {

constexpr double kTolerance = 1e-4;

class LossGradient : public ::testing::TestWithParam<std::size_t> {};
class BlockGradient : public ::testing::TestWithParam<std::size_t> {};

void check_case(const gradcheck::Case& c, int instances) {
    const auto results = gradcheck::run_suite({c}, instances);
    ASSERT_EQ(results.size(), 1u);
    EXPECT_EQ(results[0].instances, instances);
    EXPECT_LT(results[0].max_error, kTolerance) << c.name;
}

TEST_P(LossGradient, MatchesCentralDifferences) {
    check_case(gradcheck::loss_cases().at(GetParam()), 20);
}

TEST_P(BlockGradient, MatchesCentralDifferences) {
    check_case(gradcheck::block_cases().at(GetParam()), 20);
}

std::string loss_name(const ::testing::TestParamInfo<std::size_t>& info) {
    return gradcheck::loss_cases().at(info.param).name;
}

std::string block_name(const ::testing::TestParamInfo<std::size_t>& info) {
    return gradcheck::block_cases().at(info.param).name;
}

INSTANTIATE_TEST_SUITE_P(All, LossGradient, ::testing::Range<std::size_t>(0, 4), loss_name);
INSTANTIATE_TEST_SUITE_P(All, BlockGradient, ::testing::Range<std::size_t>(0, 13), block_name);

TEST(GradientChecker, DetectsAWrongGradient) {
    // The value is sum(x^2) but autograd sees only one factor, so the analytic gradient is
    // x instead of 2x; the checker must flag it.
    auto x = torch::randn({4}, torch::kFloat64).requires_grad_(true);
    gradcheck::Instance inst;
    inst.leaves = {x};
    inst.loss = [x]() { return (x.detach() * x).sum(); };
    EXPECT_GT(gradcheck::relative_error(inst, 1), 0.1);
}

}  // namespace
