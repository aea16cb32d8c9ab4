#ifndef MTXPLAIN_ENCODER_H_
#define MTXPLAIN_ENCODER_H_

#include <string>
#include <vector>

#include "mtxplain/ops.h"
#include "mtxplain/parameters.h"
#include "mtxplain/rng.h"
#include "mtxplain/tensor.h"

namespace mtx {

// kMExCB is the full hierarchical model. kMExCBCnn and kMExCBGru keep only
// the convolutional or only the recurrent path at both levels. The last
// three are flat baselines.
enum class Variant { kMExCB, kMExCBCnn, kMExCBGru, kBiRnn, kBiRnnAttn, kCnnGru };

Variant parse_variant(const std::string& name);
std::string variant_name(Variant v);

struct EncoderConfig {
  size_t embed_dim = 300;  // D_e
  size_t hidden = 128;     // D_h, GRU units per direction
  size_t attention = 200;  // D_sa
  size_t filters = 200;    // F
  size_t window = 3;       // k1
  size_t segment = 8;      // l, tokens per sub-sentence
  size_t max_len = 64;     // N
  Variant variant = Variant::kMExCB;
  // CNN-GRU baseline filter banks.
  std::vector<size_t> baseline_windows = {2, 3, 4};
  size_t baseline_filters = 100;

  // Throws ConfigError on inconsistent settings.
  void validate() const;
  size_t segments() const { return max_len / segment; }  // P
  // Width of the sentence representation E^s.
  size_t output_dim() const;
  // Width of the vector fed to the rationale head.
  size_t rationale_dim() const;
};

// One GRU direction. Gate blocks are laid out [update | reset | candidate].
struct GruParams {
  Tensor w;     // in x 3h
  Tensor u_zr;  // h x 2h
  Tensor u_n;   // h x h
  Tensor b;     // 1 x 3h

  static GruParams create(ParameterStore& store, const std::string& prefix,
                          size_t in, size_t hidden, Rng& rng);
  size_t hidden() const { return u_n.rows(); }
};

struct AttentionParams {
  Tensor wq, bq, wk, bk, wv, bv;

  static AttentionParams create(ParameterStore& store, const std::string& prefix,
                                size_t in, size_t out, Rng& rng);
};

struct ConvParams {
  Tensor filters;  // F x k x d
  Tensor bias;     // F

  static ConvParams create(ParameterStore& store, const std::string& prefix,
                           size_t in, size_t count, size_t window, Rng& rng);
};

// Runs one GRU direction over the rows of `e`. Masked steps carry the
// previous state forward unchanged. Returns T x h.
Tensor gru_encode(const Tensor& e, const GruParams& p, const Mask& mask, bool reverse);

// Forward and backward GRU passes from a zero state, concatenated per
// timestep: T x 2h.
Tensor bigru_encode(const Tensor& e, const GruParams& forward,
                    const GruParams& backward, const Mask& mask);

struct AttentionResult {
  Tensor output;   // T x D_sa
  Tensor weights;  // T x T, rows sum to one over unmasked keys
};

// softmax(Q K^T) V with Q, K, V affine in h. Scores are not scaled by
// 1/sqrt(d). Masked keys get a -1e9 logit. Throws DataError if every
// position is masked.
AttentionResult self_attention(const Tensor& h, const AttentionParams& p,
                               const Mask& mask);

// Mean of the unmasked rows of each width-l segment: N x D -> N/l x D.
Tensor subsentence_average(const Tensor& a, const Mask& mask, size_t l);

// Same-padded convolution and ReLU, then a masked max-pool inside each
// width-l segment: N x d -> N/l x F. Padded rows are zeroed before the
// convolution so they act exactly like the outer padding.
Tensor segment_cnn(const Tensor& e, const ConvParams& p, const Mask& mask, size_t l);

// Intermediate views of one encoded input. Views a variant does not
// compute are left undefined.
struct EncodedViews {
  Tensor word_hidden;         // H^w    N x 2D_h
  Tensor word_attention;      // A^w    N x D_sa
  Tensor word_attn_weights;   //        N x N
  Tensor word_segments;       // G^w    P x D_sa
  Tensor word_conv;           // C^w    P x F
  Tensor subsentence;         // E^ss   P x D_sa
  Tensor sub_attention;       //        P x D_sa
  Tensor sub_attn_weights;    //        P x P
  Tensor sub_recurrent;       // G^ss   1 x D_sa
  Tensor sub_conv;            // C^ss   1 x F
  Tensor sentence;            // E^s    1 x output_dim
  Tensor rationale_input;     //        1 x rationale_dim
  Mask mask;
  Mask segment_mask;
};

// The shared encoder. Parameters are registered in `store` under
// "encoder." names; variants share names for the paths they have in common.
class Encoder {
 public:
  Encoder(const EncoderConfig& config, ParameterStore& store, Rng& rng);

  const EncoderConfig& config() const { return config_; }
  EncodedViews encode(const Tensor& e, const Mask& mask) const;

 private:
  EncodedViews encode_hierarchical(const Tensor& e, const Mask& mask) const;
  EncodedViews encode_flat(const Tensor& e, const Mask& mask) const;

  EncoderConfig config_;
  GruParams word_fwd_, word_bwd_, sub_fwd_, sub_bwd_;
  AttentionParams word_sat_, sub_sat_;
  ConvParams word_conv_, sub_conv_;
  std::vector<ConvParams> baseline_convs_;
};

}  // namespace mtx

#endif  // MTXPLAIN_ENCODER_H_
