#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "rain/diff/cells.hpp"
#include "rain/diff/gradcheck.hpp"
#include "rain/diff/params.hpp"
#include "rain/diff/tape.hpp"
#include "rain/errors.hpp"

namespace rain::diff {
namespace {

std::vector<double> values(Var<double> v) { return {v.value().begin(), v.value().end()}; }

TEST(Affine, HandExample) {
  Tape<double> t;
  auto x = t.constant({1, 2});
  auto W = t.constant({1, 0, 1, 1}, 2, 2);
  auto b = t.constant({0.5, -0.5});
  EXPECT_EQ(values(affine(x, W, b)), (std::vector<double>{3.5, 1.5}));
}

TEST(Affine, ZeroAndIdentity) {
  Tape<double> t;
  auto x = t.constant({0.3, -1.7, 2.0});
  auto zero = affine(x, t.constant(std::vector<double>(9, 0.0), 3, 3), t.zeros(3));
  EXPECT_EQ(values(zero), (std::vector<double>{0, 0, 0}));
  auto id = affine(x, t.constant({1, 0, 0, 0, 1, 0, 0, 0, 1}, 3, 3), t.zeros(3));
  EXPECT_EQ(values(id), values(x));
}

TEST(Affine, ShapeMismatchNamesBothShapes) {
  Tape<double> t;
  auto x = t.constant({1, 2, 3});
  auto W = t.constant({1, 0, 1, 1}, 2, 2);
  try {
    affine(x, W, t.zeros(2));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("1x3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("2x2"), std::string::npos) << msg;
  }
}

TEST(Activation, PointValues) {
  Tape<double> t;
  EXPECT_EQ(values(relu(t.constant({-1, 2}))), (std::vector<double>{0, 2}));
  EXPECT_EQ(values(tanh(t.constant({0}))), (std::vector<double>{0}));
  EXPECT_EQ(values(sigmoid(t.constant({0}))), (std::vector<double>{0.5}));
  auto s = values(sigmoid(t.constant({-800, 800})));
  EXPECT_EQ(s[0], 0.0);
  EXPECT_EQ(s[1], 1.0);
}

TEST(Elementwise, ValuesAndRouting) {
  Tape<double> t;
  auto a = t.constant({1, -2, 3});
  EXPECT_EQ(values(mul(a, t.zeros(3))), (std::vector<double>{0, 0, 0}));
  EXPECT_EQ(values(concat({t.constant({1}), t.constant({2, 3})})), (std::vector<double>{1, 2, 3}));
  EXPECT_THROW(add(a, t.zeros(2)), DimensionError);

  ParameterStore<double> store(1);
  auto& pa = store.add("a", 1, 3, Init::xavier_uniform);
  auto& pb = store.add("b", 1, 3, Init::xavier_uniform);
  Tape<double> t2;
  auto d = sub(t2.param(pa), t2.param(pb));
  auto weights = t2.constant({1, 1, 1});
  t2.backward(dot(d, weights));
  EXPECT_EQ(pa.grad, (std::vector<double>{1, 1, 1}));
  EXPECT_EQ(pb.grad, (std::vector<double>{-1, -1, -1}));
}

TEST(Elementwise, SubOfSelfIsZeroWithCancellingGrads) {
  ParameterStore<double> store(2);
  auto& p = store.add("a", 1, 4, Init::xavier_uniform);
  Tape<double> t;
  auto a = t.param(p);
  auto d = sub(a, a);
  EXPECT_EQ(values(d), (std::vector<double>(4, 0.0)));
  t.backward(dot(d, t.constant({1, 2, 3, 4})));
  EXPECT_EQ(p.grad, (std::vector<double>(4, 0.0)));
}

TEST(Concat, SplitsGradients) {
  ParameterStore<double> store(3);
  auto& p1 = store.add("p1", 1, 1, Init::xavier_uniform);
  auto& p2 = store.add("p2", 1, 2, Init::xavier_uniform);
  Tape<double> t;
  auto c = concat({t.param(p1), t.param(p2)});
  t.backward(dot(c, t.constant({5, 6, 7})));
  EXPECT_EQ(p1.grad, (std::vector<double>{5}));
  EXPECT_EQ(p2.grad, (std::vector<double>{6, 7}));
}

TEST(SoftmaxXent, UniformIsLogClasses) {
  Tape<double> t;
  auto r = softmax_xent(t.constant(std::vector<double>(7, 0.25)), 3);
  EXPECT_NEAR(r.loss.scalar(), 1.9459101490553132, 1e-12);
  for (double p : r.probs) EXPECT_NEAR(p, 1.0 / 7.0, 1e-15);
}

TEST(SoftmaxXent, HandExampleAndGradient) {
  ParameterStore<double> store(0);
  auto& logits = store.add("logits", 1, 3, Init::zeros);
  logits.value = {1, 2, 3};
  Tape<double> t;
  auto r = softmax_xent(t.param(logits), 2);
  EXPECT_NEAR(r.loss.scalar(), 0.40760596444438, 1e-12);
  t.backward(r.loss);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(logits.grad[i], r.probs[i] - (i == 2 ? 1.0 : 0.0), 1e-15);
  }
}

TEST(SoftmaxXent, LargeLogitsDoNotOverflow) {
  Tape<double> t;
  auto r = softmax_xent(t.constant({1000, 0}), 0);
  EXPECT_NEAR(r.probs[0], 1.0, 1e-15);
  EXPECT_NEAR(r.probs[1], 0.0, 1e-15);
  EXPECT_TRUE(std::isfinite(r.loss.scalar()));
  EXPECT_THROW(softmax_xent(t.constant({1, 2}), 2), DimensionError);
}

TEST(Softmax, SumsToOneOnRandomLogits) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> scale(0.01, 200.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + trial % 9;
    const double s = scale(rng);
    std::vector<float> logits(n);
    for (auto& v : logits) v = static_cast<float>(s * normal(rng));
    Tape<float> t;
    auto p = softmax(t.constant(logits));
    float total = 0;
    for (float v : p.value()) {
      EXPECT_GE(v, 0.0f);
      EXPECT_LE(v, 1.0f);
      total += v;
    }
    EXPECT_NEAR(total, 1.0f, 1e-6f);
  }
}

TEST(Tape, NonFiniteValuesNameTheOp) {
  Tape<double> t;
  auto big = t.constant({1e300});
  try {
    mul(big, big);
    FAIL() << "expected NonFiniteError";
  } catch (const NonFiniteError& e) {
    EXPECT_NE(std::string(e.what()).find("mul"), std::string::npos);
  }
  EXPECT_THROW(t.constant({std::nan("")}), NonFiniteError);
}

TEST(Tape, BackwardVisitsEachNodeOnceAndAccumulatesFanOut) {
  ParameterStore<double> store(0);
  auto& p = store.add("x", 1, 1, Init::zeros);
  p.value = {3.0};
  Tape<double> t;
  auto x = t.param(p);
  auto y = add(mul(x, x), x);  // x^2 + x
  auto z = add(y, y);          // fan-out of y
  t.backward(z);
  EXPECT_EQ(t.backward_visits(), t.node_count());
  EXPECT_DOUBLE_EQ(p.grad[0], 2 * (2 * 3.0 + 1));
  EXPECT_THROW(t.backward(z), Error);
}

TEST(Lstm, ZeroParamsGiveZeroState) {
  ParameterStore<double> store(0);
  auto p = LstmParams<double>::create(store, "lstm", 3, 2);
  for (std::size_t i = 0; i < store.size(); ++i) std::fill(store[i].value.begin(), store[i].value.end(), 0.0);
  Tape<double> t;
  auto s = lstm_cell(t.constant({1, -2, 0.5}), lstm_zero_state(t, 2), p);
  EXPECT_EQ(values(s.h), (std::vector<double>{0, 0}));
  EXPECT_EQ(values(s.c), (std::vector<double>{0, 0}));
}

TEST(Lstm, SaturatedGatesRememberPerfectly) {
  ParameterStore<double> store(4);
  auto p = LstmParams<double>::create(store, "lstm", 2, 3);
  std::fill(p.w_f->value.begin(), p.w_f->value.end(), 0.0);
  std::fill(p.w_i->value.begin(), p.w_i->value.end(), 0.0);
  std::fill(p.b_f->value.begin(), p.b_f->value.end(), 60.0);
  std::fill(p.b_i->value.begin(), p.b_i->value.end(), -60.0);
  Tape<double> t;
  auto prev = LstmState<double>{t.constant({0.1, -0.2, 0.3}), t.constant({0.4, -0.5, 0.6})};
  auto s = lstm_cell(t.constant({0.7, -0.8}), prev, p);
  const auto c = values(s.c);
  EXPECT_NEAR(c[0], 0.4, 1e-12);
  EXPECT_NEAR(c[1], -0.5, 1e-12);
  EXPECT_NEAR(c[2], 0.6, 1e-12);
}

LstmParams<double> one_dim_lstm(ParameterStore<double>& store) {
  auto p = LstmParams<double>::create(store, "lstm", 1, 1);
  p.w_i->value = {0.3, -0.2};
  p.b_i->value = {0.1};
  p.w_f->value = {0.4, 0.1};
  p.b_f->value = {-0.1};
  p.w_o->value = {-0.5, 0.2};
  p.b_o->value = {0.05};
  p.w_g->value = {0.6, -0.3};
  p.b_g->value = {0.0};
  return p;
}

TEST(Lstm, OneDimHandCase) {
  ParameterStore<double> store(0);
  auto p = one_dim_lstm(store);
  Tape<double> t;
  auto s = lstm_cell(t.constant({0.5}), {t.constant({0.1}), t.constant({0.2})}, p);
  EXPECT_NEAR(s.h.scalar(), 0.112493319310116, 1e-14);
  EXPECT_NEAR(s.c.scalar(), 0.252398834854701, 1e-14);
}

TEST(Lstm, TwoStepHandCase) {
  ParameterStore<double> store(0);
  auto p = one_dim_lstm(store);
  Tape<double> t;
  auto s1 = lstm_cell(t.constant({0.5}), lstm_zero_state(t, 1), p);
  EXPECT_NEAR(s1.h.scalar(), 0.0730711843185512, 1e-14);
  auto s2 = lstm_cell(t.constant({-1.0}), s1, p);
  EXPECT_NEAR(s2.h.scalar(), -0.116362826198494, 1e-14);
  EXPECT_NEAR(s2.c.scalar(), -0.184592784335377, 1e-14);
  EXPECT_THROW(lstm_cell(t.constant({1.0, 2.0}), s2, p), DimensionError);
}

TEST(Gru, ZeroParamsKeepZero) {
  ParameterStore<double> store(0);
  auto p = GruParams<double>::create(store, "gru", 2, 3);
  for (std::size_t i = 0; i < store.size(); ++i) std::fill(store[i].value.begin(), store[i].value.end(), 0.0);
  Tape<double> t;
  EXPECT_EQ(values(gru_cell(t.constant({1, 2}), t.zeros(3), p)), (std::vector<double>{0, 0, 0}));
}

TEST(Gru, ClosedUpdateGateKeepsState) {
  ParameterStore<double> store(6);
  auto p = GruParams<double>::create(store, "gru", 2, 3);
  std::fill(p.w_z->value.begin(), p.w_z->value.end(), 0.0);
  std::fill(p.b_z->value.begin(), p.b_z->value.end(), -60.0);
  Tape<double> t;
  auto h = gru_cell(t.constant({0.9, -0.4}), t.constant({0.25, -0.5, 0.75}), p);
  const auto v = values(h);
  EXPECT_NEAR(v[0], 0.25, 1e-12);
  EXPECT_NEAR(v[1], -0.5, 1e-12);
  EXPECT_NEAR(v[2], 0.75, 1e-12);
}

TEST(Gru, OneDimHandCase) {
  ParameterStore<double> store(0);
  auto p = GruParams<double>::create(store, "gru", 1, 1);
  p.w_z->value = {0.2, 0.3};
  p.b_z->value = {-0.1};
  p.w_r->value = {-0.4, 0.5};
  p.b_r->value = {0.2};
  p.w_n->value = {0.7, -0.6};
  p.b_n->value = {0.05};
  Tape<double> t;
  EXPECT_NEAR(gru_cell(t.constant({0.5}), t.constant({-0.3}), p).scalar(), 0.0575885435718643, 1e-14);
}

TEST(ParameterStoreTest, XavierBoundsZeroBiasesAndDeterminism) {
  ParameterStore<double> a(11), b(11), c(12);
  for (auto* s : {&a, &b, &c}) {
    s->add("W", 30, 20, Init::xavier_uniform);
    s->add("b", 1, 20, Init::zeros);
  }
  const double bound = std::sqrt(6.0 / 50.0);
  for (double v : a.get("W").value) {
    EXPECT_LE(std::abs(v), bound);
  }
  EXPECT_EQ(a.get("b").value, std::vector<double>(20, 0.0));
  EXPECT_EQ(a.get("W").value, b.get("W").value);
  EXPECT_NE(a.get("W").value, c.get("W").value);
  EXPECT_EQ(a.parameter_count(), 620u);
  EXPECT_EQ(a[0].name, "W");
  EXPECT_EQ(a[1].name, "b");
  EXPECT_THROW(a.add("W", 1, 1, Init::zeros), Error);
  EXPECT_THROW(a.add("e", 0, 1, Init::zeros), DimensionError);
}

TEST(ParameterStoreTest, FloatAndDoubleAgreeToFloatPrecision) {
  ParameterStore<float> f(3);
  ParameterStore<double> d(3);
  f.add("W", 5, 4, Init::xavier_uniform);
  d.add("W", 5, 4, Init::xavier_uniform);
  for (std::size_t k = 0; k < 20; ++k) EXPECT_EQ(f[0].value[k], static_cast<float>(d[0].value[k]));
}

// Reduces any op output to a scalar through a fixed random projection and
// checks all leaves by central differences.
double check(const std::function<Var<double>(Tape<double>&, ParameterStore<double>&)>& build,
             ParameterStore<double>& store, double eps = 1e-4) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> projection(64);
  for (auto& v : projection) v = u(rng);
  std::function<double(bool)> loss = [&](bool backward) {
    Tape<double> t;
    auto y = build(t, store);
    std::vector<double> w(projection.begin(), projection.begin() + static_cast<long>(y.size()));
    auto s = dot(y, t.constant(w));
    if (backward) t.backward(s);
    return s.scalar();
  };
  GradCheckOptions options;
  options.eps = eps;
  return grad_check(store, loss, options).max_relative_error;
}

TEST(GradCheck, EveryOpAgreesWithCentralDifferences) {
  ParameterStore<double> s(21);
  auto& x = s.add("x", 1, 4, Init::xavier_uniform);
  auto& W = s.add("W", 4, 3, Init::xavier_uniform);
  auto& b = s.add("b", 1, 3, Init::xavier_uniform);
  auto& y = s.add("y", 1, 4, Init::xavier_uniform);
  for (auto& v : x.value) v *= 3;
  auto lstm = LstmParams<double>::create(s, "lstm", 4, 3);
  auto gru = GruParams<double>::create(s, "gru", 4, 3);
  for (auto* p : {lstm.b_i, lstm.b_f, lstm.b_o, lstm.b_g, gru.b_z, gru.b_r, gru.b_n}) {
    for (auto& v : p->value) v = 0.1;
  }

  using Build = std::function<Var<double>(Tape<double>&, ParameterStore<double>&)>;
  const std::vector<std::pair<std::string, Build>> ops = {
      {"affine", [&](Tape<double>& t, auto&) { return affine(t.param(x), t.param(W), t.param(b)); }},
      {"linear", [&](Tape<double>& t, auto&) { return linear(t.param(x), t.param(W)); }},
      {"relu", [&](Tape<double>& t, auto&) { return relu(t.param(x)); }},
      {"tanh", [&](Tape<double>& t, auto&) { return tanh(t.param(x)); }},
      {"sigmoid", [&](Tape<double>& t, auto&) { return sigmoid(t.param(x)); }},
      {"add", [&](Tape<double>& t, auto&) { return add(t.param(x), t.param(y)); }},
      {"sub", [&](Tape<double>& t, auto&) { return sub(t.param(x), t.param(y)); }},
      {"mul", [&](Tape<double>& t, auto&) { return mul(t.param(x), t.param(y)); }},
      {"concat", [&](Tape<double>& t, auto&) { return concat({t.param(x), t.param(b), t.param(y)}); }},
      {"scale", [&](Tape<double>& t, auto&) { return scale(t.param(x), -2.5); }},
      {"softmax", [&](Tape<double>& t, auto&) { return softmax(t.param(x)); }},
      {"dot", [&](Tape<double>& t, auto&) { return dot(t.param(x), t.param(y)); }},
      {"mean",
       [&](Tape<double>& t, auto&) {
         std::vector<Var<double>> parts = {t.param(x), t.param(y), mul(t.param(x), t.param(y))};
         return mean<double>(parts);
       }},
      {"weighted_sum",
       [&](Tape<double>& t, auto&) {
         std::vector<Var<double>> parts = {t.param(x), t.param(y), tanh(t.param(x))};
         return weighted_sum<double>(softmax(t.param(b)), parts);
       }},
      {"embedding", [&](Tape<double>& t, auto&) { return embedding(t, W, 2); }},
      {"softmax_xent", [&](Tape<double>& t, auto&) { return softmax_xent(t.param(y), 1).loss; }},
      {"lstm",
       [&](Tape<double>& t, auto&) {
         auto s1 = lstm_cell(t.param(x), lstm_zero_state(t, 3), lstm);
         auto s2 = lstm_cell(t.param(y), s1, lstm);
         return concat({s2.h, s2.c});
       }},
      {"gru",
       [&](Tape<double>& t, auto&) {
         auto h = gru_cell(t.param(x), t.zeros(3), gru);
         return gru_cell(t.param(y), h, gru);
       }},
  };
  for (const auto& [name, build] : ops) {
    EXPECT_LT(check(build, s), 1e-4) << name;
  }
}

TEST(GradCheck, LinearModelIsExactToRounding) {
  ParameterStore<double> s(8);
  auto& x = s.add("x", 1, 5, Init::xavier_uniform);
  auto& W = s.add("W", 5, 4, Init::xavier_uniform);
  auto& b = s.add("b", 1, 4, Init::xavier_uniform);
  const std::vector<double> W0 = W.value, x0 = x.value;
  // every parameter enters linearly: x through a fixed matrix, W through a fixed input
  const double err = check(
      [&](Tape<double>& t, auto&) {
        auto Wc = t.constant(W0, W.rows, W.cols);
        return add(affine(t.param(x), Wc, t.param(b)), linear(t.constant(x0), t.param(W)));
      },
      s);
  EXPECT_LT(err, 1e-9);
}

TEST(GradCheck, CorruptedBackwardIsFlagged) {
  ParameterStore<double> s(9);
  auto& x = s.add("x", 1, 3, Init::xavier_uniform);
  auto& W = s.add("W", 3, 2, Init::xavier_uniform);
  std::function<double(bool)> loss = [&](bool backward) {
    Tape<double> t;
    auto y = tanh(linear(t.param(x), t.param(W)));
    auto l = dot(y, t.constant({0.7, -1.3}));
    if (backward) {
      t.backward(l);
      for (auto& g : W.grad) g *= 1.5;  // mutation: wrong derivative for W
    }
    return l.scalar();
  };
  const auto r = grad_check(s, loss);
  EXPECT_GT(r.max_relative_error, 1e-2);
  EXPECT_EQ(r.worst_param, "W");
}

TEST(GradCheck, NonFiniteLossThrows) {
  ParameterStore<double> s(1);
  s.add("x", 1, 1, Init::zeros);
  std::function<double(bool)> loss = [](bool) { return std::numeric_limits<double>::infinity(); };
  EXPECT_THROW(grad_check(s, loss), NonFiniteError);
}

TEST(GradCheck, LargeParametersAreSampled) {
  ParameterStore<double> s(2);
  auto& big = s.add("big", 100, 50, Init::xavier_uniform);
  std::function<double(bool)> loss = [&](bool backward) {
    Tape<double> t;
    auto l = dot(embedding(t, big, 7), t.constant(std::vector<double>(50, 0.5)));
    if (backward) t.backward(l);
    return l.scalar();
  };
  GradCheckOptions options;
  options.full_check_limit = 1000;
  options.sample_size = 256;
  const auto r = grad_check(s, loss, options);
  EXPECT_EQ(r.entries_checked, 256u);
  EXPECT_LT(r.max_relative_error, 1e-9);
}

TEST(Determinism, SameInputsGiveBitwiseSameResults) {
  auto run = [] {
    ParameterStore<float> s(77);
    auto p = LstmParams<float>::create(s, "l", 3, 4);
    Tape<float> t;
    auto st = lstm_zero_state(t, 4);
    for (int i = 0; i < 5; ++i) st = lstm_cell(t.constant({0.1f * i, -0.2f, 0.3f}), st, p);
    auto l = softmax_xent(st.h, 1);
    t.backward(l.loss);
    std::vector<float> out = {l.loss.scalar()};
    for (std::size_t i = 0; i < s.size(); ++i) out.insert(out.end(), s[i].grad.begin(), s[i].grad.end());
    return out;
  };
  EXPECT_EQ(run(), run());
}

}  // namespace
}  // namespace rain::diff
