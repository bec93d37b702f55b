#include "padt/vocab.hpp"

#include "padt/errors.hpp"

namespace padt {

TextEmbedding::TextEmbedding(ag::ParamStore& ps, const std::string& name,
                             int v_text_, int d_, Rng& rng)
    : v_text(v_text_), d(d_) {
  table = ps.add(name, nn::randn(rng, v_text_, d_, 0.02));
}

VisualProjector::VisualProjector(ag::ParamStore& ps, const std::string& name,
                                 int d_, int r_, Rng& rng)
    : d(d_), r(r_) {
  if (r_ < 1) throw ConfigError("VisualProjector: rank must be >= 1");
  ln = nn::LayerNormP(ps, name + ".ln", d_);
  down = ps.add(name + ".down",
                nn::randn(rng, d_, r_, std::sqrt(2.0 / (d_ + r_))));
  // Small up-projection keeps fresh prototypes near the text-embedding
  // scale, so an untrained model is close to uniform over the whole
  // dynamic vocabulary.
  up = ps.add(name + ".up", nn::randn(rng, r_, d_, 0.02));
}

ag::Value VisualProjector::forward(ag::Tape& t, ag::ParamStore& ps,
                                   ag::Value patch_features) const {
  if (t.cols(patch_features) != d)
    throw ShapeError("VisualProjector: input width " +
                     std::to_string(t.cols(patch_features)) + ", expected " +
                     std::to_string(d));
  ag::Value x = ln.forward(t, ps, patch_features);
  return t.matmul(t.matmul(x, t.param(ps, down)), t.param(ps, up));
}

int DynamicVocabulary::vrt_of(int vocab_id) const {
  if (!is_vrt_id(vocab_id))
    throw VocabRangeError("vocabulary id " + std::to_string(vocab_id) +
                          " is not a VRT in [" + std::to_string(v_text) +
                          ", " + std::to_string(total_size()) + ")");
  return vocab_id - v_text;
}

int DynamicVocabulary::vocab_of_vrt(int vrt_index) const {
  if (vrt_index < 0 || vrt_index >= n_merged)
    throw VocabRangeError("VRT index " + std::to_string(vrt_index) +
                          " out of [0, " + std::to_string(n_merged) + ")");
  return v_text + vrt_index;
}

DynamicVocabulary expand_vocabulary(ag::Tape& t, ag::Value text_table,
                                    ag::Value prototypes, int v_text) {
  if (t.cols(text_table) != t.cols(prototypes))
    throw ShapeError("expand_vocabulary: width mismatch " +
                     std::to_string(t.cols(text_table)) + " vs " +
                     std::to_string(t.cols(prototypes)));
  if (t.rows(text_table) != v_text)
    throw ShapeError("expand_vocabulary: table has " +
                     std::to_string(t.rows(text_table)) + " rows, v_text is " +
                     std::to_string(v_text));
  DynamicVocabulary v;
  v.table = t.concat_rows({text_table, prototypes});
  v.v_text = v_text;
  v.n_merged = t.rows(prototypes);
  return v;
}

ag::Value vocab_logits(ag::Tape& t, const DynamicVocabulary& vocab,
                       ag::Value hidden) {
  if (t.cols(hidden) != t.cols(vocab.table))
    throw ShapeError("vocab_logits: hidden width " +
                     std::to_string(t.cols(hidden)) + " vs table width " +
                     std::to_string(t.cols(vocab.table)));
  return t.matmul_nt(hidden, vocab.table);
}

ag::Value vocab_embed(ag::Tape& t, const DynamicVocabulary& vocab,
                      const std::vector<int>& ids) {
  for (int id : ids)
    if (id < 0 || id >= vocab.total_size())
      throw VocabRangeError("vocab_embed: id " + std::to_string(id) +
                            " out of [0, " +
                            std::to_string(vocab.total_size()) + ")");
  return t.gather_rows(vocab.table, ids);
}

}  // namespace padt
