#pragma once

#include <string>
#include <vector>

#include "padt/autograd.hpp"
#include "padt/nn.hpp"
#include "padt/rng.hpp"

namespace padt {

// Trainable text embedding table, V_text x d.
struct TextEmbedding {
  int table = -1;  // ParamStore index
  int v_text = 0;
  int d = 0;
  TextEmbedding() = default;
  TextEmbedding(ag::ParamStore& ps, const std::string& name, int v_text,
                int d, Rng& rng);
};

// f_vp: LayerNorm followed by a low-rank projection (d -> r -> d, bias-free,
// no residual). Maps patch features to visual reference prototypes.
struct VisualProjector {
  nn::LayerNormP ln;
  int down = -1;  // d x r
  int up = -1;    // r x d
  int d = 0;
  int r = 0;
  VisualProjector() = default;
  VisualProjector(ag::ParamStore& ps, const std::string& name, int d, int r,
                  Rng& rng);
  // patch_features: N' x d -> prototypes: N' x d
  ag::Value forward(ag::Tape& t, ag::ParamStore& ps,
                    ag::Value patch_features) const;
};

// Per-image vocabulary: text rows [0, v_text) followed by this image's N'
// prototype rows. The same table node serves as input embedding and output
// classifier, so the weight tying is structural.
struct DynamicVocabulary {
  ag::Value table;  // (v_text + n_merged) x d
  int v_text = 0;
  int n_merged = 0;

  int total_size() const { return v_text + n_merged; }
  bool is_vrt_id(int vocab_id) const {
    return vocab_id >= v_text && vocab_id < total_size();
  }
  // Vocabulary id -> merged patch index; throws VocabRangeError.
  int vrt_of(int vocab_id) const;
  // Merged patch index -> vocabulary id; throws VocabRangeError.
  int vocab_of_vrt(int vrt_index) const;
};

// Stacks [text table; prototypes] into one dynamic table.
DynamicVocabulary expand_vocabulary(ag::Tape& t, ag::Value text_table,
                                    ag::Value prototypes, int v_text);

// hidden: T x d -> logits: T x (v_text + n_merged), row v = <hidden, table_v>.
ag::Value vocab_logits(ag::Tape& t, const DynamicVocabulary& vocab,
                       ag::Value hidden);

// ids -> their embedding rows; throws on out-of-range ids.
ag::Value vocab_embed(ag::Tape& t, const DynamicVocabulary& vocab,
                      const std::vector<int>& ids);

}  // namespace padt
