#include <doctest.h>

#include "padt/errors.hpp"
#include "padt/rng.hpp"
#include "padt/vocab.hpp"

using namespace padt;
using ag::Mat;
using ag::Tape;
using ag::Value;

namespace {

Mat randm(Rng& rng, int r, int c, double scale = 1.0) {
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = scale * rng.normal();
  return m;
}

}  // namespace

TEST_SUITE("vocab") {

TEST_CASE("expansion stacks text rows then prototypes") {
  Rng rng(1);
  const int v_text = 6, n = 4, d = 8;
  Mat text = randm(rng, v_text, d);
  Mat proto = randm(rng, n, d);
  Tape t;
  DynamicVocabulary vocab =
      expand_vocabulary(t, t.input(text), t.input(proto), v_text);
  CHECK(vocab.total_size() == v_text + n);
  CHECK(vocab.n_merged == n);
  const Mat& table = t.val(vocab.table);
  CHECK(table.topRows(v_text) == text);
  CHECK(table.bottomRows(n) == proto);
}

TEST_CASE("id mapping between vocabulary and patch space") {
  DynamicVocabulary vocab;
  vocab.v_text = 98;
  vocab.n_merged = 16;
  CHECK(!vocab.is_vrt_id(97));
  CHECK(vocab.is_vrt_id(98));
  CHECK(vocab.is_vrt_id(113));
  CHECK(!vocab.is_vrt_id(114));
  CHECK(vocab.vrt_of(98) == 0);
  CHECK(vocab.vrt_of(113) == 15);
  CHECK(vocab.vocab_of_vrt(0) == 98);
  CHECK(vocab.vocab_of_vrt(15) == 113);
  CHECK_THROWS_AS(vocab.vrt_of(97), VocabRangeError);
  CHECK_THROWS_AS(vocab.vrt_of(114), VocabRangeError);
  CHECK_THROWS_AS(vocab.vocab_of_vrt(-1), VocabRangeError);
  CHECK_THROWS_AS(vocab.vocab_of_vrt(16), VocabRangeError);
}

TEST_CASE("logits match a scalar dot-product loop") {
  Rng rng(2);
  const int v_text = 5, n = 3, d = 6, T = 4;
  Mat text = randm(rng, v_text, d);
  Mat proto = randm(rng, n, d);
  Mat hidden = randm(rng, T, d);
  Tape t;
  DynamicVocabulary vocab =
      expand_vocabulary(t, t.input(text), t.input(proto), v_text);
  Value logits = vocab_logits(t, vocab, t.input(hidden));
  REQUIRE(t.rows(logits) == T);
  REQUIRE(t.cols(logits) == v_text + n);
  for (int i = 0; i < T; ++i)
    for (int v = 0; v < v_text + n; ++v) {
      double dot = 0;
      for (int k = 0; k < d; ++k)
        dot += hidden(i, k) *
               (v < v_text ? text(v, k) : proto(v - v_text, k));
      CHECK(t.val(logits)(i, v) == doctest::Approx(dot).epsilon(1e-12));
    }
}

TEST_CASE("embedding gathers rows and rejects bad ids") {
  Rng rng(3);
  const int v_text = 5, n = 3, d = 6;
  Mat text = randm(rng, v_text, d);
  Mat proto = randm(rng, n, d);
  Tape t;
  DynamicVocabulary vocab =
      expand_vocabulary(t, t.input(text), t.input(proto), v_text);
  Value emb = vocab_embed(t, vocab, {0, 6, 2});
  CHECK(t.val(emb).row(0) == text.row(0));
  CHECK(t.val(emb).row(1) == proto.row(1));
  CHECK(t.val(emb).row(2) == text.row(2));
  CHECK_THROWS_AS(vocab_embed(t, vocab, {8}), VocabRangeError);
  CHECK_THROWS_AS(vocab_embed(t, vocab, {-1}), VocabRangeError);
}

TEST_CASE("weight tying: one table feeds both embed and classifier") {
  Rng rng(4);
  const int v_text = 4, n = 2, d = 5;
  ag::ParamStore ps;
  TextEmbedding text(ps, "text", v_text, d, rng);
  Mat proto = randm(rng, n, d);

  Tape t;
  DynamicVocabulary vocab =
      expand_vocabulary(t, t.param(ps, text.table), t.input(proto), v_text);
  Value emb = vocab_embed(t, vocab, {1, 5});
  Value logits = vocab_logits(t, vocab, emb);
  t.backward(t.mean(logits));

  // Text row 1 is used as an input embedding; every text row also appears
  // in the classifier. Both paths land in the same parameter gradient.
  const Mat& g = ps.grad("text");
  CHECK(g.row(1).cwiseAbs().sum() > 0);
  CHECK(g.row(0).cwiseAbs().sum() > 0);  // classifier-only row
}

TEST_CASE("projector is layer norm into a bias-free bottleneck") {
  Rng rng(5);
  const int d = 8, r = 2;
  ag::ParamStore ps;
  VisualProjector fvp(ps, "fvp", d, r, rng);
  CHECK(fvp.r == r);
  // exactly four tensors: ln gamma, ln beta, down, up (no bias anywhere)
  CHECK(ps.size() == 4);
  CHECK(ps.value("fvp.down").rows() == d);
  CHECK(ps.value("fvp.down").cols() == r);
  CHECK(ps.value("fvp.up").rows() == r);
  CHECK(ps.value("fvp.up").cols() == d);

  Tape t;
  Mat x = randm(rng, 6, d, 2.0);
  Value out = fvp.forward(t, ps, t.input(x));
  CHECK(t.rows(out) == 6);
  CHECK(t.cols(out) == d);
  // rank bound: N' x d output has rank <= r
  Eigen::JacobiSVD<Mat> svd(t.val(out));
  int rank = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > 1e-9) ++rank;
  CHECK(rank <= r);

  CHECK_THROWS_AS(fvp.forward(t, ps, t.input(randm(rng, 3, d + 1))),
                  ShapeError);
  CHECK_THROWS_AS(VisualProjector(ps, "fvp2", d, 0, rng), ConfigError);
}

TEST_CASE("prototype gradients flow through the projector") {
  Rng rng(6);
  const int d = 8, r = 2, v_text = 4, n = 3;
  ag::ParamStore ps;
  TextEmbedding text(ps, "text", v_text, d, rng);
  VisualProjector fvp(ps, "fvp", d, r, rng);

  Tape t;
  Mat feats = randm(rng, n, d);
  Value proto = fvp.forward(t, ps, t.input(feats));
  DynamicVocabulary vocab =
      expand_vocabulary(t, t.param(ps, text.table), proto, v_text);
  Value logits = vocab_logits(t, vocab, t.input(randm(rng, 2, d)));
  t.backward(t.mean(logits));
  CHECK(ps.grad("fvp.down").cwiseAbs().sum() > 0);
  CHECK(ps.grad("fvp.up").cwiseAbs().sum() > 0);
}

TEST_CASE("different images produce different prototype rows only") {
  Rng rng(7);
  const int d = 8, r = 2, v_text = 4, n = 3;
  ag::ParamStore ps;
  TextEmbedding text(ps, "text", v_text, d, rng);
  VisualProjector fvp(ps, "fvp", d, r, rng);

  auto table_for = [&](const Mat& feats) {
    Tape t;
    Value proto = fvp.forward(t, ps, t.input(feats));
    DynamicVocabulary vocab =
        expand_vocabulary(t, t.param(ps, text.table), proto, v_text);
    return t.val(vocab.table).eval();
  };
  const Mat ta = table_for(randm(rng, n, d));
  const Mat tb = table_for(randm(rng, n, d));
  CHECK(ta.topRows(v_text) == tb.topRows(v_text));
  CHECK((ta.bottomRows(n) - tb.bottomRows(n)).cwiseAbs().maxCoeff() > 1e-6);
}

}  // TEST_SUITE
