#include <cmath>

#include "doctest.h"
#include "mtxplain/error.h"
#include "mtxplain/gradcheck.h"
#include "mtxplain/multitask.h"
#include "test_util.h"

using namespace mtx;
using mtx::testing::random_tensor;

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void set(Tensor t, std::initializer_list<double> values) {
  REQUIRE(t.numel() == values.size());
  std::copy(values.begin(), values.end(), t.mutable_data().begin());
}

void zero(Tensor t) {
  auto d = t.mutable_data();
  std::fill(d.begin(), d.end(), 0.0);
}

ModelConfig tiny_model(const std::string& tasks) {
  ModelConfig c;
  c.encoder.embed_dim = 5;
  c.encoder.hidden = 3;
  c.encoder.attention = 4;
  c.encoder.filters = 4;
  c.encoder.window = 3;
  c.encoder.segment = 4;
  c.encoder.max_len = 8;
  c.head_width = 6;
  c.tasks = TaskSet::parse(tasks);
  c.seed = 7;
  return c;
}

Mask prefix_mask(size_t n, size_t real) {
  Mask m(n, 0);
  for (size_t i = 0; i < real; ++i) m[i] = 1;
  return m;
}

// Builds an output whose every enabled distribution puts mass `p` on the
// gold class.
MultiTaskOutput scripted_output(double p, const Mask& mask) {
  MultiTaskOutput out;
  out.mask = mask;
  out.p_bully = Tensor::from({1, 2}, {1 - p, p});
  std::vector<double> s(3, (1 - p) / 2);
  s[0] = p;
  out.p_sentiment = Tensor::from({1, 3}, s);
  std::vector<double> t(8, (1 - p) / 7);
  t[7] = p;
  out.p_target = Tensor::from({1, 8}, t);
  return out;
}

Gold full_gold() {
  Gold g;
  g.bully = 1;
  g.sentiment = 0;
  g.target = 7;
  g.rationale = std::vector<double>{1, 0, 1, 0};
  return g;
}

}  // namespace

TEST_CASE("task set parsing and supported combinations") {
  CHECK(TaskSet::parse("cd,rd,sa").to_string() == "cd,rd,sa");
  CHECK(TaskSet::parse(" CD , RD ").to_string() == "cd,rd");
  for (const char* ok : {"cd", "cd,sa", "cd,rd", "cd,rd,sa", "cd,rd,ti", "cd,rd,sa,ti"}) {
    CHECK_NOTHROW(TaskSet::parse(ok));
  }
  CHECK_THROWS_AS(TaskSet::parse("cd,xx"), ConfigError);
  CHECK_THROWS_AS(TaskSet::parse("cd,ti"), ConfigError);
  CHECK_THROWS_AS(TaskSet::parse("rd,sa"), ConfigError);
  CHECK(task_classes(Task::kCD) == 2);
  CHECK(task_classes(Task::kSA) == 3);
  CHECK(task_classes(Task::kTI) == 8);
  CHECK_THROWS_AS(task_classes(Task::kRD), ConfigError);
}

TEST_CASE("loss weight defaults and validation") {
  LossWeights w;
  CHECK(w.cd == 1.0);
  CHECK(w.rd == 0.75);
  CHECK(w.sa == 0.66);
  CHECK(w.ti == 0.50);
  w.sa = 0.0;
  CHECK_THROWS_AS(w.validate(), ConfigError);
  w.sa = 1.5;
  CHECK_THROWS_AS(w.validate(), ConfigError);
}

TEST_CASE("heads: zero parameters give a uniform distribution of K classes") {
  for (size_t k : {size_t{2}, size_t{3}, size_t{8}}) {
    ParameterStore store;
    Rng rng(1);
    HeadParams p = HeadParams::create(store, "h", 400, 100, k, rng);
    store.fill_zero();
    HeadOutput out = head_forward(random_tensor({1, 400}, rng), p, nullptr);
    CHECK(out.logits.shape() == Shape{1, k});
    CHECK(out.hidden.shape() == Shape{1, 100});
    Tensor probs = softmax_rows(out.logits);
    for (double v : probs.data()) CHECK(v == doctest::Approx(1.0 / k).epsilon(1e-15));
  }
}

TEST_CASE("head miniature with unit widths") {
  ParameterStore store;
  Rng rng(1);
  HeadParams p = HeadParams::create(store, "h", 1, 1, 2, rng);
  set(p.w1, {2.0});
  set(p.b1, {-0.5});
  set(p.w2, {1.5});
  set(p.b2, {0.25});
  set(p.wo, {1.0, -3.0});
  set(p.bo, {0.1, 0.2});
  const double x = 0.8;
  const double h1 = std::max(0.0, 2.0 * x - 0.5);
  const double h2 = std::max(0.0, 1.5 * h1 + 0.25);
  HeadOutput out = head_forward(Tensor::from({1, 1}, {x}), p, nullptr);
  CHECK(out.hidden.item() == doctest::Approx(h2).epsilon(1e-15));
  CHECK(out.logits[0] == doctest::Approx(h2 + 0.1).epsilon(1e-15));
  CHECK(out.logits[1] == doctest::Approx(-3.0 * h2 + 0.2).epsilon(1e-15));
}

TEST_CASE("dropout stream is seeded and inverted") {
  Tensor x = Tensor::full({1, 2000}, 1.0);
  DropoutStream a(0.25, 3), b(0.25, 3), c(0.25, 4);
  Tensor ya = a.apply(x), yb = b.apply(x), yc = c.apply(x);
  size_t kept = 0;
  bool differs = false;
  for (size_t i = 0; i < 2000; ++i) {
    CHECK(ya[i] == yb[i]);
    CHECK((ya[i] == 0.0 || ya[i] == doctest::Approx(1.0 / 0.75)));
    kept += ya[i] != 0.0;
    differs |= ya[i] != yc[i];
  }
  CHECK(differs);
  CHECK(kept > 1400);
  CHECK(kept < 1600);
  // Later draws use fresh counters.
  Tensor again = a.apply(x);
  bool changed = false;
  for (size_t i = 0; i < 2000; ++i) changed |= again[i] != ya[i];
  CHECK(changed);
  DropoutStream off(0.0, 3);
  CHECK(off.apply(x)[5] == 1.0);
}

TEST_CASE("rationale head examples") {
  ParameterStore store;
  Rng rng(2);
  RationaleParams p = RationaleParams::create(store, "rd", 3, 4, rng);
  Tensor g = random_tensor({1, 3}, rng);
  Mask mask{1, 1, 1, 0};

  store.fill_zero();
  RationaleOutput zero_out = rationale_head(g, p, mask);
  for (size_t i = 0; i < 3; ++i) CHECK(zero_out.masked_probs[i] == 0.5);
  CHECK(zero_out.masked_probs[3] == 0.0);

  set(p.b, {40, 40, 40, 40});
  RationaleOutput saturated = rationale_head(g, p, mask);
  for (size_t i = 0; i < 3; ++i) CHECK(saturated.masked_probs[i] > 1 - 1e-12);
  CHECK(saturated.masked_probs[3] == 0.0);

  ParameterStore small;
  RationaleParams q = RationaleParams::create(small, "rd", 2, 2, rng);
  set(q.w, {1.0, -2.0, 0.5, 3.0});  // rows: input dims; cols: positions
  set(q.b, {0.1, -0.2});
  Tensor h = Tensor::from({1, 2}, {0.4, -0.6});
  RationaleOutput r = rationale_head(h, q, {1, 1});
  CHECK(r.probs[0] == doctest::Approx(sig(0.4 * 1.0 - 0.6 * 0.5 + 0.1)).epsilon(1e-15));
  CHECK(r.probs[1] == doctest::Approx(sig(0.4 * -2.0 - 0.6 * 3.0 - 0.2)).epsilon(1e-15));

  CHECK_THROWS_AS(rationale_head(h, q, {1, 1, 1}), DimensionError);
}

TEST_CASE("fusion examples") {
  Tensor fc2 = Tensor::from({1, 2}, {0.5, 1.5});
  Tensor fused = fuse_bully(fc2, Tensor(), Tensor(), Tensor());
  CHECK(fused[0] == 0.5);
  CHECK(fused[1] == 1.5);

  Tensor probs = Tensor::from({1, 3}, {0.2, 0.9, 0.0});
  Tensor zero_proj = Tensor::zeros({3, 2});
  Tensor zero_sa = Tensor::zeros({1, 2});
  Tensor zeroed = fuse_bully(fc2, probs, zero_proj, zero_sa);
  CHECK(zeroed[0] == 0.5);
  CHECK(zeroed[1] == 1.5);

  // Identity-shaped 2-d miniature with all-ones inputs.
  Tensor ones = Tensor::full({1, 2}, 1.0);
  Tensor proj = Tensor::matrix({{1, 0}, {0, 1}});
  Tensor toy = fuse_bully(ones, ones, proj, ones);
  CHECK(toy[0] == 3.0);
  CHECK(toy[1] == 3.0);

  Tensor proj2 = Tensor::matrix({{1, 2}, {3, 4}});
  Tensor r = Tensor::from({1, 2}, {0.5, 0.25});
  Tensor mixed = fuse_bully(ones, r, proj2, Tensor::from({1, 2}, {0.1, 0.2}));
  CHECK(mixed[0] == doctest::Approx(1 + 0.5 * 1 + 0.25 * 3 + 0.1));
  CHECK(mixed[1] == doctest::Approx(1 + 0.5 * 2 + 0.25 * 4 + 0.2));
}

TEST_CASE("joint loss: unit component losses sum to the weight total") {
  TaskSet all = TaskSet::parse("cd,rd,sa,ti");
  TaskLosses losses;
  for (Task t : all.enabled()) losses[t] = Tensor::scalar(1.0);
  CHECK(combine_losses(losses, LossWeights{}, all).item() ==
        doctest::Approx(2.91).epsilon(1e-15));

  // Same through the full path: p[gold] = 1/e gives CE = 1; rationale
  // probabilities equal to 1/e on positive and 1 - 1/e on negative tokens.
  const double p = std::exp(-1.0);
  MultiTaskOutput out = scripted_output(p, {1, 1, 1, 1});
  out.rationale_raw = Tensor::from({1, 4}, {p, 1 - p, p, 1 - p});
  out.p_rationale = out.rationale_raw;
  CHECK(joint_loss(out, full_gold(), LossWeights{}, all).item() ==
        doctest::Approx(2.91).epsilon(1e-12));
}

TEST_CASE("joint loss: perfect predictions give zero") {
  TaskSet all = TaskSet::parse("cd,rd,sa,ti");
  MultiTaskOutput out = scripted_output(1.0, {1, 1, 1, 1});
  out.rationale_raw = Tensor::from({1, 4}, {1, 0, 1, 0});
  out.p_rationale = out.rationale_raw;
  double total = joint_loss(out, full_gold(), LossWeights{}, all).item();
  CHECK(total >= 0.0);
  CHECK(total < 1e-11);
}

TEST_CASE("joint loss: CD only with a uniform distribution is ln 2") {
  MultiTaskOutput out = scripted_output(0.5, {1});
  Gold g;
  g.bully = 0;
  CHECK(joint_loss(out, g, LossWeights{}, TaskSet::parse("cd")).item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("joint loss: removing a task removes exactly its weighted term") {
  Rng rng(11);
  const Mask mask{1, 1, 1, 0};
  for (int trial = 0; trial < 20; ++trial) {
    MultiTaskOutput out = scripted_output(rng.uniform(0.05, 0.95), mask);
    std::vector<double> rd(4);
    for (double& v : rd) v = rng.uniform(0.01, 0.99);
    out.rationale_raw = Tensor::from({1, 4}, rd);
    Gold g = full_gold();
    LossWeights w;
    TaskSet all = TaskSet::parse("cd,rd,sa,ti");
    TaskLosses parts = task_losses(out, g, all);
    double total = combine_losses(parts, w, all).item();
    CHECK(total >= 0.0);

    TaskSet no_sa = TaskSet::parse("cd,rd,ti");
    double without_sa = joint_loss(out, g, w, no_sa).item();
    CHECK(std::abs(total - w.sa * parts[Task::kSA].item() - without_sa) < 1e-12);
    TaskSet no_ti = TaskSet::parse("cd,rd,sa");
    double without_ti = joint_loss(out, g, w, no_ti).item();
    CHECK(std::abs(total - w.ti * parts[Task::kTI].item() - without_ti) < 1e-12);
  }
}

TEST_CASE("joint loss: RD term ignores padded positions") {
  TaskSet cd_rd = TaskSet::parse("cd,rd");
  Mask mask{1, 1, 0, 0};
  MultiTaskOutput a = scripted_output(0.7, mask);
  a.rationale_raw = Tensor::from({1, 4}, {0.8, 0.3, 0.1, 0.9});
  MultiTaskOutput b = scripted_output(0.7, mask);
  b.rationale_raw = Tensor::from({1, 4}, {0.8, 0.3, 0.999, 0.0001});
  Gold ga = full_gold();
  Gold gb = full_gold();
  gb.rationale = std::vector<double>{1, 0, 0, 1};
  CHECK(joint_loss(a, ga, LossWeights{}, cd_rd).item() ==
        joint_loss(b, gb, LossWeights{}, cd_rd).item());
}

TEST_CASE("joint loss: missing gold for an enabled task is a data error") {
  MultiTaskOutput out = scripted_output(0.6, {1, 1, 1, 1});
  out.rationale_raw = Tensor::full({1, 4}, 0.5);
  Gold g;
  g.bully = 1;
  CHECK_THROWS_AS(joint_loss(out, g, LossWeights{}, TaskSet::parse("cd,sa")), DataError);
  CHECK_THROWS_AS(joint_loss(out, g, LossWeights{}, TaskSet::parse("cd,rd")), DataError);
  g.rationale = std::vector<double>{0, 0, 0, 0};
  CHECK_THROWS_AS(joint_loss(out, g, LossWeights{}, TaskSet::parse("cd,rd,ti")), DataError);
  CHECK_NOTHROW(joint_loss(out, g, LossWeights{}, TaskSet::parse("cd,rd")));
}

TEST_CASE("p_bully argmax is shift invariant") {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor logits = random_tensor({1, 2}, rng, -3, 3);
    Tensor shifted = add_row(logits, Tensor::full({1, 2}, rng.uniform(-50, 50)));
    Tensor p = softmax_rows(logits), q = softmax_rows(shifted);
    CHECK((p[0] > p[1]) == (q[0] > q[1]));
  }
}

TEST_CASE("model config JSON round trip and errors") {
  ModelConfig c = tiny_model("cd,rd,ti");
  c.encoder.variant = Variant::kCnnGru;
  c.weights.rd = 0.4;
  nlohmann::json j = model_config_to_json(c);
  ModelConfig back = model_config_from_json(j);
  CHECK(model_config_to_json(back) == j);
  CHECK(back.tasks == c.tasks);
  CHECK(back.encoder.variant == Variant::kCnnGru);

  ModelConfig partial = model_config_from_json({{"hidden", 9}});
  CHECK(partial.encoder.hidden == 9);
  CHECK(partial.encoder.attention == 200);

  CHECK_THROWS_AS(model_config_from_json({{"hidden", "lots"}}), ConfigError);
  CHECK_THROWS_AS(model_config_from_json(nlohmann::json::array()), ConfigError);
  CHECK_THROWS_AS(model_config_from_json({{"tasks", "sa"}}), ConfigError);
  ModelConfig bad = tiny_model("cd,rd");
  bad.head_width = 0;
  CHECK_THROWS_AS(MultiTaskModel{bad}, ConfigError);
}

TEST_CASE("model forward produces valid distributions for every task set") {
  for (const char* tasks : {"cd", "cd,sa", "cd,rd", "cd,rd,sa", "cd,rd,ti", "cd,rd,sa,ti"}) {
    CAPTURE(tasks);
    ModelConfig c = tiny_model(tasks);
    MultiTaskModel model(c);
    Rng rng(13);
    Mask mask = prefix_mask(8, 5);
    MultiTaskOutput out = model.forward(random_tensor({8, 5}, rng), mask);
    auto simplex = [](const Tensor& p, size_t k) {
      REQUIRE(p.shape() == Shape{1, k});
      double total = 0.0;
      for (double v : p.data()) {
        CHECK(v >= 0.0);
        total += v;
      }
      CHECK(std::abs(total - 1.0) < 1e-9);
    };
    simplex(out.p_bully, 2);
    CHECK(out.p_sentiment.defined() == c.tasks.sa);
    CHECK(out.p_target.defined() == c.tasks.ti);
    CHECK(out.p_rationale.defined() == c.tasks.rd);
    if (c.tasks.sa) simplex(out.p_sentiment, 3);
    if (c.tasks.ti) simplex(out.p_target, 8);
    if (c.tasks.rd) {
      std::vector<uint8_t> pred = out.rationale_prediction();
      REQUIRE(pred.size() == 8);
      for (size_t i = 0; i < 8; ++i) {
        CHECK(out.p_rationale[i] >= 0.0);
        CHECK(out.p_rationale[i] <= 1.0);
        if (!mask[i]) {
          CHECK(out.p_rationale[i] == 0.0);
          CHECK(pred[i] == 0);
        }
        CHECK(pred[i] == (mask[i] && out.p_rationale[i] > 0.5 ? 1 : 0));
      }
    } else {
      CHECK(out.rationale_prediction().empty());
    }
  }
}

TEST_CASE("parameter initialization is a function of the seed") {
  MultiTaskModel a(tiny_model("cd,rd,sa"));
  MultiTaskModel b(tiny_model("cd,rd,sa"));
  ModelConfig other = tiny_model("cd,rd,sa");
  other.seed = 8;
  MultiTaskModel c(other);
  bool differs = false;
  for (size_t i = 0; i < a.parameters().size(); ++i) {
    const auto& ta = a.parameters().entries()[i].second;
    const auto& tb = b.parameters().entries()[i].second;
    const auto& tc = c.parameters().entries()[i].second;
    for (size_t j = 0; j < ta.numel(); ++j) {
      CHECK(ta[j] == tb[j]);
      differs |= ta[j] != tc[j];
    }
  }
  CHECK(differs);
}

TEST_CASE("zeroed auxiliary channels reproduce the CD-only forward bitwise") {
  MultiTaskModel multi(tiny_model("cd,rd,sa"));
  MultiTaskModel single(tiny_model("cd"));
  zero(multi.parameters().get("fusion.rationale_proj"));
  // Zero SA head weights make its FC2 activation exactly zero.
  for (const auto& [name, t] : multi.parameters().entries()) {
    if (name.rfind("head.sa.", 0) == 0) zero(t);
  }
  CHECK(single.parameters().copy_matching_from(multi.parameters()) ==
        single.parameters().size());
  Rng rng(14);
  Tensor e = random_tensor({8, 5}, rng);
  Mask mask = prefix_mask(8, 6);
  MultiTaskOutput a = multi.forward(e, mask);
  MultiTaskOutput b = single.forward(e, mask);
  for (size_t i = 0; i < 2; ++i) {
    CHECK(a.bully_logits[i] == b.bully_logits[i]);
    CHECK(a.p_bully[i] == b.p_bully[i]);
  }
}

TEST_CASE("joint loss gradients match finite differences through the whole model") {
  ModelConfig c = tiny_model("cd,rd,sa,ti");
  c.encoder.max_len = 4;
  c.encoder.segment = 2;
  MultiTaskModel model(c);
  Rng rng(15);
  for (const auto& [name, t] : model.parameters().entries()) {
    if (name.find(".b") != std::string::npos) {
      for (double& v : Tensor(t).mutable_data()) v = rng.uniform(-0.3, 0.3);
    }
  }
  Tensor e = random_tensor({4, 5}, rng);
  Mask mask{1, 1, 1, 0};
  Gold g = full_gold();
  g.target = 3;
  g.sentiment = 2;
  auto f = [&] { return joint_loss(model.forward(e, mask), g, c.weights, c.tasks); };
  GradCheckReport r = gradcheck(f, model.parameters().entries());
  CHECK(r.max_rel_error < 1e-3);
}
