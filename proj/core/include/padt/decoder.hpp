#pragma once

#include <string>
#include <vector>

#include "padt/autograd.hpp"
#include "padt/nn.hpp"
#include "padt/rng.hpp"
#include "padt/sequencing.hpp"

namespace padt {

// One object's structured outputs, live on a tape.
struct StructuredPrediction {
  ag::Value box;          // 1 x 4, normalized corners, canonical
  ag::Value mask_logits;  // (rows_merged * upsample) x (cols_merged * upsample)
  ag::Value score;        // 1 x 1 in (0, 1)
};

// Decoder block alternating query self-attention, query-to-image cross
// attention, feed-forward, and image-to-query cross attention, each followed
// by a residual add and layer norm. Query and image streams keep their
// shapes.
struct TwoWayBlock {
  nn::Mha self_attn, cross_qi, cross_iq;
  nn::Mlp mlp;
  nn::LayerNormP ln1, ln2, ln3, ln4;
  TwoWayBlock() = default;
  TwoWayBlock(ag::ParamStore& ps, const std::string& name, int d, int heads,
              int mlp_hidden, Rng& rng);
  // Returns {queries, image} after the block.
  std::pair<ag::Value, ag::Value> forward(ag::Tape& t, ag::ParamStore& ps,
                                          ag::Value queries,
                                          ag::Value image) const;
};

struct DecoderConfig {
  int d = 128;
  int heads = 4;
  int n_blocks = 3;
  int mlp_hidden = 256;  // 2 * d by convention
  int upsample = 4;
};

// Turns one object-query group plus the image's patch features into a box,
// a mask-logit grid, and a confidence score. Three learnable task tokens
// are prepended to every group; the image stream starts from the passed
// patch features on every call, so groups decode independently.
class ObjectDecoder {
 public:
  ObjectDecoder() = default;
  ObjectDecoder(ag::ParamStore& ps, const std::string& name,
                const DecoderConfig& cfg, Rng& rng);

  // group_hidden: k x d (k >= 1); patch_features: (rows*cols) x d.
  StructuredPrediction decode_group(ag::Tape& t, ag::ParamStore& ps,
                                    ag::Value group_hidden,
                                    ag::Value patch_features, int rows_merged,
                                    int cols_merged) const;

  // Order-preserving map over groups already on the tape.
  std::vector<StructuredPrediction> decode_all(
      ag::Tape& t, ag::ParamStore& ps, const std::vector<ag::Value>& groups,
      ag::Value patch_features, int rows_merged, int cols_merged) const;

  // Convenience for evaluation: wraps each parsed group's hidden matrix as
  // a constant input.
  std::vector<StructuredPrediction> decode_all(
      ag::Tape& t, ag::ParamStore& ps,
      const std::vector<ObjectQueryGroup>& groups, ag::Value patch_features,
      int rows_merged, int cols_merged) const;

  const DecoderConfig& config() const { return cfg_; }

 private:
  DecoderConfig cfg_;
  int bbox_tok_ = -1, mask_tok_ = -1, score_tok_ = -1;
  std::vector<TwoWayBlock> blocks_;
  nn::Linear box_head_, score_head_;
};

}  // namespace padt
