// Copyright 2026 The Warden Authors.
// SPDX-License-Identifier: Apache-2.0

#include "warden/verify.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

namespace warden {
namespace {

const CheckResult& find(const std::vector<CheckResult>& rs, const std::string& name) {
  auto it = std::find_if(rs.begin(), rs.end(), [&](const CheckResult& r) { return r.name == name; });
  if (it == rs.end()) throw std::runtime_error("no check named " + name);
  return *it;
}

TEST(Verify, SmallRunPasses) {
  VerifyOptions opt;
  opt.trials = 3;
  opt.primal_trials = 10000;
  const auto rs = run_verification(opt);
  for (const auto& r : rs) {
    EXPECT_TRUE(r.passed) << r.name << " worst=" << r.worst << " seed=" << r.failing_seed;
    EXPECT_GT(r.instances, 0u) << r.name;
  }
  std::ostringstream os;
  print_verification_table(os, rs);
  EXPECT_NE(os.str().find("duality_gap_kl"), std::string::npos);
}

TEST(Verify, CorruptedDerivativeIsCaught) {
  VerifyOptions opt;
  opt.trials = 3;
  opt.corrupt_derivative = true;
  EXPECT_FALSE(check_bisection(opt, 3).passed);
  EXPECT_FALSE(check_derivative(opt, 4).passed);
}

TEST(Verify, InstanceSeedsAreDistinct) {
  EXPECT_NE(instance_seed(0, 1, 0), instance_seed(0, 1, 1));
  EXPECT_NE(instance_seed(0, 1, 0), instance_seed(0, 2, 0));
  EXPECT_NE(instance_seed(0, 1, 0), instance_seed(1, 1, 0));
}

TEST(Verify, InvariantsHoldOnManyInstances) {
  for (const auto& r : check_invariants(200, 42, 6)) {
    EXPECT_TRUE(r.passed) << r.name << " worst=" << r.worst;
  }
  (void)find;
}

}  // namespace
}  // namespace warden
