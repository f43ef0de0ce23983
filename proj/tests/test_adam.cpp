#include <gtest/gtest.h>

#include "protoseq/adam.hpp"
#include "protoseq/tape.hpp"

using namespace protoseq;

TEST(Adam, ZeroGradientIsNoOpOnValues) {
  Parameter w("w", Tensor::vector({1.0, -2.0}));
  w.grad_live = true;  // populated with zeros by a backward pass
  Parameter* ps[] = {&w};
  adam_step(ps, {});
  EXPECT_DOUBLE_EQ(w.value.data[0], 1.0);
  EXPECT_DOUBLE_EQ(w.value.data[1], -2.0);
  EXPECT_EQ(w.step_count, 1u);
}

TEST(Adam, BiasCorrectedFirstStep) {
  // w = 0, grad = 1, lr = 1e-3: first step moves w to -lr / (1 + eps) ~ -0.001
  Parameter w("w", Tensor::scalar(0.0));
  w.grad[0] = 1.0;
  w.grad_live = true;
  Parameter* ps[] = {&w};
  adam_step(ps, {.lr = 1e-3});
  EXPECT_NEAR(w.value.data[0], -1e-3, 1e-10);
}

TEST(Adam, StepCountIncrementsOncePerCall) {
  Parameter w("w", Tensor::scalar(0.0));
  Parameter* ps[] = {&w};
  for (int i = 1; i <= 5; ++i) {
    w.grad[0] = 0.5;
    w.grad_live = true;
    adam_step(ps, {});
    EXPECT_EQ(w.step_count, static_cast<std::uint64_t>(i));
  }
}

TEST(Adam, MissingGradIsAnError) {
  Parameter w("w", Tensor::scalar(0.0));
  Parameter* ps[] = {&w};
  EXPECT_THROW(adam_step(ps, {}), std::logic_error);
}

TEST(Adam, GradsZeroedAfterStep) {
  Parameter w("w", Tensor::scalar(0.0));
  w.grad[0] = 3.0;
  w.grad_live = true;
  Parameter* ps[] = {&w};
  adam_step(ps, {});
  EXPECT_DOUBLE_EQ(w.grad[0], 0.0);
  EXPECT_FALSE(w.grad_live);
}

TEST(Adam, TwoStepRecurrenceHandChecked) {
  // lr=0.1, b1=0.9, b2=0.999, eps=1e-8, grads 1 then 1
  Parameter w("w", Tensor::scalar(0.0));
  Parameter* ps[] = {&w};
  AdamConfig cfg{.lr = 0.1, .beta1 = 0.9, .beta2 = 0.999, .eps = 1e-8};

  w.grad[0] = 1.0;
  w.grad_live = true;
  adam_step(ps, cfg);
  const double w1 = -0.1 * 1.0 / (1.0 + 1e-8);  // mhat = 1, vhat = 1
  EXPECT_NEAR(w.value.data[0], w1, 1e-12);

  w.grad[0] = 1.0;
  w.grad_live = true;
  adam_step(ps, cfg);
  // m2 = 0.9*0.1 + 0.1 = 0.19; mhat = 0.19/(1-0.81) = 1
  // v2 = 0.999*0.001 + 0.001 = 0.001999; vhat = 0.001999/(1-0.998001) = 1
  const double w2 = w1 - 0.1 * 1.0 / (1.0 + 1e-8);
  EXPECT_NEAR(w.value.data[0], w2, 1e-12);
}

TEST(Adam, DrivesQuadraticTowardMinimum) {
  Parameter w("w", Tensor::vector({5.0}));
  Parameter* ps[] = {&w};
  for (int i = 0; i < 2000; ++i) {
    Tape tape;
    Var wv = tape.leaf(w);
    Var loss = sum(mul(wv, wv));
    tape.backward(loss);
    adam_step(ps, {.lr = 0.05});
  }
  EXPECT_NEAR(w.value.data[0], 0.0, 1e-3);
}
