#include <doctest.h>

#include <cmath>

#include "padt/errors.hpp"
#include "padt/losses.hpp"
#include "padt/toy_model.hpp"

using namespace padt;
using ag::Mat;
using ag::Tape;
using ag::Value;

namespace {

ModelConfig small_cfg() {
  ModelConfig cfg;
  cfg.d = 32;
  cfg.d_v = 16;
  cfg.n_layers = 1;
  cfg.n_heads = 2;
  cfg.vision_layers = 1;
  cfg.vision_heads = 2;
  cfg.mlp_ratio = 2;
  cfg.image_h = 28;
  cfg.image_w = 28;
  cfg.patch = 14;
  cfg.merge = 1;  // 2x2 merged grid, 4 VRTs
  cfg.max_seq = 128;
  cfg.decoder.d = 32;
  cfg.decoder.heads = 2;
  cfg.decoder.n_blocks = 1;
  cfg.decoder.mlp_hidden = 64;
  cfg.decoder.upsample = 2;
  return cfg;
}

Image test_image(uint64_t seed = 5) {
  Rng rng(seed);
  Image img(28, 28, {30, 30, 32});
  img.fill_rect(PixelRect{4 + static_cast<int>(rng.below(4)), 4, 16, 18},
                {200, 60, 60});
  return img;
}

}  // namespace

TEST_SUITE("toy_model") {

TEST_CASE("patch extraction scales and orders pixels") {
  PatchGrid grid(28, 28, 14, 1);
  Image img(28, 28, {0, 0, 0});
  // brighten exactly the second raw patch (top-right)
  img.fill_rect(PixelRect{14, 0, 28, 14}, {255, 255, 255});
  const Mat m = image_to_patches(img, grid);
  REQUIRE(m.rows() == 4);
  REQUIRE(m.cols() == 14 * 14 * 3);
  CHECK(m.row(0).maxCoeff() == -0.5);
  CHECK(m.row(1).minCoeff() == 0.5);
  CHECK(m.row(2).maxCoeff() == -0.5);
  CHECK(m.minCoeff() >= -0.5);
  CHECK(m.maxCoeff() <= 0.5);
  CHECK_THROWS_AS(image_to_patches(Image(14, 28), grid), DimensionError);
}

TEST_CASE("encode produces the advertised shapes") {
  PadtModel model(small_cfg(), 11);
  Tape t;
  const auto enc = model.encode(t, test_image());
  CHECK(t.rows(enc.patch_features) == 4);
  CHECK(t.cols(enc.patch_features) == 32);
  CHECK(enc.rows_merged == 2);
  CHECK(enc.cols_merged == 2);
  CHECK(enc.vocab.n_merged == 4);
  CHECK(enc.vocab.v_text == Tokenizer::kVText);
  CHECK(enc.vocab.total_size() == Tokenizer::kVText + 4);
}

TEST_CASE("same seed builds the same model, different seeds do not") {
  const auto cfg = small_cfg();
  PadtModel a(cfg, 21), b(cfg, 21), c(cfg, 22);
  REQUIRE(a.params().size() == b.params().size());
  bool all_equal = true, any_differs = false;
  for (int i = 0; i < a.params().size(); ++i) {
    if (a.params().value(i) != b.params().value(i)) all_equal = false;
    if ((a.params().value(i) - c.params().value(i)).cwiseAbs().maxCoeff() >
        0.0)
      any_differs = true;
  }
  CHECK(all_equal);
  CHECK(any_differs);

  const auto prompt = Tokenizer::encode("hi");
  std::vector<int> ids = {Tokenizer::kBos};
  ids.insert(ids.end(), prompt.begin(), prompt.end());
  ids.push_back(Tokenizer::kSep);
  const auto ga = a.generate(test_image(), ids, Task::kRec, 8, {});
  const auto gb = b.generate(test_image(), ids, Task::kRec, 8, {});
  CHECK(ga.seq.ids == gb.seq.ids);
  CHECK((ga.hidden - gb.hidden).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("hidden states are causal in the token stream") {
  PadtModel model(small_cfg(), 31);
  Tape t;
  const auto enc = model.encode(t, test_image());
  std::vector<int> a = {0, 10, 20, 30, 40, 50};
  std::vector<int> b = a;
  b[4] = 77;  // diverge at position 4
  const Mat ha = t.val(model.forward_hidden(t, enc, a));
  const Mat hb = t.val(model.forward_hidden(t, enc, b));
  REQUIRE(ha.rows() == 6);
  for (int i = 0; i < 4; ++i)
    CHECK((ha.row(i) - hb.row(i)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((ha.row(4) - hb.row(4)).cwiseAbs().maxCoeff() > 0.0);
  CHECK((ha.row(5) - hb.row(5)).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("a fresh model prices tokens near uniform") {
  PadtModel model(small_cfg(), 41);
  Tape t;
  const auto enc = model.encode(t, test_image());
  std::vector<int> ids = {Tokenizer::kBos};
  for (char c : std::string("hello there")) ids.push_back(Tokenizer::char_id(c));
  Value hidden = model.forward_hidden(t, enc, ids);
  Value logits = model.forward_logits(t, enc, hidden);
  const int v = Tokenizer::kVText + 4;
  CHECK(t.cols(logits) == v);
  std::vector<int> targets(ids.size(), 0);
  Value ce = robust_ce(t, logits, targets,
                       Mat::Zero(static_cast<int>(ids.size()), 4),
                       Tokenizer::kVText);
  CHECK(std::abs(t.scalar(ce) - std::log(static_cast<double>(v))) < 0.5);
}

TEST_CASE("generation replays to the same hidden states") {
  PadtModel model(small_cfg(), 51);
  const Image img = test_image();
  std::vector<int> prompt = {Tokenizer::kBos};
  for (char c : std::string("find it")) prompt.push_back(Tokenizer::char_id(c));
  prompt.push_back(Tokenizer::kSep);

  const auto gen = model.generate(img, prompt, Task::kRec, 12, {});
  CHECK(gen.truncated);  // no stop tokens
  CHECK(gen.seq.ids.size() == prompt.size() + 12);
  CHECK(gen.seq.prompt_len == static_cast<int>(prompt.size()));
  CHECK(gen.hidden.rows() == static_cast<int>(gen.seq.ids.size()));
  for (int id : gen.seq.ids) {
    CHECK(id >= 0);
    CHECK(id < gen.seq.n_vocab);
  }

  Tape t;
  const auto enc = model.encode(t, img);
  const Mat replay = t.val(model.forward_hidden(t, enc, gen.seq.ids));
  CHECK((replay - gen.hidden).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("stop tokens end generation and set the flag accordingly") {
  PadtModel model(small_cfg(), 61);
  std::vector<int> prompt = {Tokenizer::kBos, Tokenizer::char_id('x'),
                             Tokenizer::kSep};
  // every id is a stop token, so generation halts after one emission
  std::vector<int> all_ids(Tokenizer::kVText + 4);
  for (size_t i = 0; i < all_ids.size(); ++i) all_ids[i] = static_cast<int>(i);
  const auto gen = model.generate(test_image(), prompt, Task::kRec, 9, all_ids);
  CHECK_FALSE(gen.truncated);
  CHECK(gen.seq.ids.size() == prompt.size() + 1);
}

TEST_CASE("sequences beyond max_seq are rejected") {
  auto cfg = small_cfg();
  cfg.max_seq = 16;
  PadtModel model(cfg, 71);
  Tape t;
  const auto enc = model.encode(t, test_image());
  std::vector<int> ids(13, 5);  // 4 prefix + 13 > 16
  CHECK_THROWS_AS(model.forward_hidden(t, enc, ids), IndexError);
  std::vector<int> ok(12, 5);
  CHECK_NOTHROW(model.forward_hidden(t, enc, ok));
}

TEST_CASE("predictor rows line up against target steps") {
  VrtSequence seq;
  seq.ids = {0, 5, 6, 2, 7, 8, 9, 1};  // prompt of 4, target of 4
  seq.prompt_len = 4;
  seq.v_text = Tokenizer::kVText;
  seq.n_vocab = Tokenizer::kVText + 4;
  const auto rows = predictor_rows(seq);
  CHECK(rows == std::vector<int>{3, 4, 5, 6});
  CHECK(rows.size() == seq.target_ids().size());
}

TEST_CASE("training gradient reaches the vision tower and the projector") {
  PadtModel model(small_cfg(), 81);
  Tape t;
  const auto enc = model.encode(t, test_image());
  std::vector<int> ids = {Tokenizer::kBos, Tokenizer::char_id('a'),
                          Tokenizer::kSep, Tokenizer::kVText + 1,
                          Tokenizer::kEos};
  Value hidden = model.forward_hidden(t, enc, ids);
  Value logits = model.forward_logits(t, enc, hidden);
  std::vector<int> targets(ids.size(), -1);
  targets[3] = Tokenizer::kVText + 1;  // supervise one VRT emission
  Mat fg = Mat::Zero(static_cast<int>(ids.size()), 4);
  Value ce = robust_ce(t, logits, targets, fg, Tokenizer::kVText);
  t.backward(ce);

  auto& ps = model.params();
  CHECK(ps.grad("vis.patch_embed.w").cwiseAbs().maxCoeff() > 0.0);
  CHECK(ps.grad("fvp.down").cwiseAbs().maxCoeff() > 0.0);
  CHECK(ps.grad("fvp.up").cwiseAbs().maxCoeff() > 0.0);
  CHECK(ps.grad("lm.text_table").cwiseAbs().maxCoeff() > 0.0);
}

}  // TEST_SUITE
