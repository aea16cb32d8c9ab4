#include "mtxplain/encoder.h"

#include "mtxplain/error.h"

namespace mtx {

namespace {

constexpr double kMaskedLogit = -1e9;

bool any_real(const Mask& mask) {
  for (uint8_t m : mask)
    if (m) return true;
  return false;
}

// Multiplies each row of x by its 0/1 mask entry.
Tensor zero_padded_rows(const Tensor& x, const Mask& mask) {
  std::vector<double> factors(x.numel());
  const size_t d = x.cols();
  for (size_t i = 0; i < x.rows(); ++i)
    for (size_t c = 0; c < d; ++c) factors[i * d + c] = mask[i] ? 1.0 : 0.0;
  return mul_constant(x, std::move(factors));
}

Tensor gru_step(const Tensor& gx, const Tensor& h, const GruParams& p) {
  const size_t hd = p.hidden();
  Tensor zr = sigmoid(add(slice_cols(gx, 0, 2 * hd), matmul(h, p.u_zr)));
  Tensor z = slice_cols(zr, 0, hd);
  Tensor r = slice_cols(zr, hd, 2 * hd);
  Tensor candidate =
      mtx::tanh(add(slice_cols(gx, 2 * hd, 3 * hd), matmul(mul(r, h), p.u_n)));
  return add(mul(one_minus(z), h), mul(z, candidate));
}

}  // namespace

Variant parse_variant(const std::string& name) {
  if (name == "mExCB") return Variant::kMExCB;
  if (name == "mExCB_CNN") return Variant::kMExCBCnn;
  if (name == "mExCB_GRU") return Variant::kMExCBGru;
  if (name == "BiRNN") return Variant::kBiRnn;
  if (name == "BiRNN_attn") return Variant::kBiRnnAttn;
  if (name == "CNN_GRU") return Variant::kCnnGru;
  throw ConfigError("unknown encoder variant '" + name +
                    "' (expected mExCB|mExCB_CNN|mExCB_GRU|BiRNN|BiRNN_attn|CNN_GRU)");
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kMExCB:
      return "mExCB";
    case Variant::kMExCBCnn:
      return "mExCB_CNN";
    case Variant::kMExCBGru:
      return "mExCB_GRU";
    case Variant::kBiRnn:
      return "BiRNN";
    case Variant::kBiRnnAttn:
      return "BiRNN_attn";
    case Variant::kCnnGru:
      return "CNN_GRU";
  }
  return "?";
}

void EncoderConfig::validate() const {
  auto positive = [](size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(embed_dim, "embedding dimension");
  positive(hidden, "GRU hidden size");
  positive(attention, "attention size");
  positive(filters, "filter count");
  positive(window, "convolution window");
  positive(segment, "segment width");
  positive(max_len, "maximum length");
  if (max_len % segment != 0) {
    throw ConfigError("maximum length " + std::to_string(max_len) +
                      " is not divisible by segment width " + std::to_string(segment));
  }
  if (variant == Variant::kMExCB && filters != attention) {
    throw ConfigError("mExCB adds G^w and C^w, so filters (" + std::to_string(filters) +
                      ") must equal the attention size (" + std::to_string(attention) + ")");
  }
  if (variant == Variant::kCnnGru) {
    if (baseline_windows.empty()) throw ConfigError("CNN_GRU needs at least one window");
    for (size_t w : baseline_windows) positive(w, "baseline window");
    positive(baseline_filters, "baseline filter count");
  }
}

size_t EncoderConfig::output_dim() const {
  switch (variant) {
    case Variant::kMExCB:
      return attention + filters;
    case Variant::kMExCBCnn:
      return filters;
    case Variant::kMExCBGru:
    case Variant::kBiRnnAttn:
      return attention;
    case Variant::kBiRnn:
      return 2 * hidden;
    case Variant::kCnnGru:
      return hidden;
  }
  return 0;
}

size_t EncoderConfig::rationale_dim() const {
  switch (variant) {
    case Variant::kMExCB:
    case Variant::kMExCBGru:
      return attention;
    case Variant::kMExCBCnn:
      return filters;
    default:
      return output_dim();
  }
}

GruParams GruParams::create(ParameterStore& store, const std::string& prefix,
                            size_t in, size_t hidden, Rng& rng) {
  GruParams p;
  p.w = store.add_xavier(prefix + ".w", {in, 3 * hidden}, in, hidden, rng);
  p.u_zr = store.add_xavier(prefix + ".u_zr", {hidden, 2 * hidden}, hidden, hidden, rng);
  p.u_n = store.add_xavier(prefix + ".u_n", {hidden, hidden}, hidden, hidden, rng);
  p.b = store.add_zeros(prefix + ".b", {1, 3 * hidden});
  return p;
}

AttentionParams AttentionParams::create(ParameterStore& store, const std::string& prefix,
                                        size_t in, size_t out, Rng& rng) {
  AttentionParams p;
  p.wq = store.add_xavier(prefix + ".wq", {in, out}, in, out, rng);
  p.bq = store.add_zeros(prefix + ".bq", {1, out});
  p.wk = store.add_xavier(prefix + ".wk", {in, out}, in, out, rng);
  p.bk = store.add_zeros(prefix + ".bk", {1, out});
  p.wv = store.add_xavier(prefix + ".wv", {in, out}, in, out, rng);
  p.bv = store.add_zeros(prefix + ".bv", {1, out});
  return p;
}

ConvParams ConvParams::create(ParameterStore& store, const std::string& prefix,
                              size_t in, size_t count, size_t window, Rng& rng) {
  ConvParams p;
  p.filters = store.add_xavier(prefix + ".filters", {count, window, in}, window * in,
                               count, rng);
  p.bias = store.add_zeros(prefix + ".bias", {count});
  return p;
}

Tensor gru_encode(const Tensor& e, const GruParams& p, const Mask& mask, bool reverse) {
  const size_t steps = e.rows();
  if (steps == 0 || mask.size() != steps) {
    throw DimensionError("gru_encode: mask length does not match the sequence");
  }
  if (e.cols() != p.w.rows()) {
    throw DimensionError("gru_encode: input width " + std::to_string(e.cols()) +
                         " does not match GRU input size " + std::to_string(p.w.rows()));
  }
  Tensor projected = add_row(matmul(e, p.w), p.b);
  Tensor h = Tensor::zeros({1, p.hidden()});
  std::vector<Tensor> states(steps);
  for (size_t k = 0; k < steps; ++k) {
    size_t t = reverse ? steps - 1 - k : k;
    if (mask[t]) h = gru_step(slice_rows(projected, t, t + 1), h, p);
    states[t] = h;
  }
  return concat_rows(states);
}

Tensor bigru_encode(const Tensor& e, const GruParams& forward, const GruParams& backward,
                    const Mask& mask) {
  std::vector<Tensor> halves{gru_encode(e, forward, mask, false),
                             gru_encode(e, backward, mask, true)};
  return concat_cols(halves);
}

AttentionResult self_attention(const Tensor& h, const AttentionParams& p, const Mask& mask) {
  const size_t steps = h.rows();
  if (mask.size() != steps) {
    throw DimensionError("self_attention: mask length does not match the sequence");
  }
  if (!any_real(mask)) throw DataError("self_attention: every position is masked");
  Tensor q = add_row(matmul(h, p.wq), p.bq);
  Tensor k = add_row(matmul(h, p.wk), p.bk);
  Tensor v = add_row(matmul(h, p.wv), p.bv);
  std::vector<double> key_bias(steps);
  for (size_t i = 0; i < steps; ++i) key_bias[i] = mask[i] ? 0.0 : kMaskedLogit;
  Tensor scores = add_row(matmul(q, transpose(k)), Tensor::from({1, steps}, key_bias));
  Tensor weights = softmax_rows(scores);
  return {matmul(weights, v), weights};
}

Tensor subsentence_average(const Tensor& a, const Mask& mask, size_t l) {
  return segment_mean(a, mask, l);
}

Tensor segment_cnn(const Tensor& e, const ConvParams& p, const Mask& mask, size_t l) {
  if (l == 0 || e.rows() % l != 0) {
    throw ConfigError("segment_cnn: length " + std::to_string(e.rows()) +
                      " is not divisible by segment width " + std::to_string(l));
  }
  Tensor features = relu(conv1d(zero_padded_rows(e, mask), p.filters, p.bias));
  return segment_max(features, mask, l);
}

Encoder::Encoder(const EncoderConfig& config, ParameterStore& store, Rng& rng)
    : config_(config) {
  config_.validate();
  const EncoderConfig& c = config_;
  const bool recurrent = c.variant == Variant::kMExCB || c.variant == Variant::kMExCBGru;
  const bool conv = c.variant == Variant::kMExCB || c.variant == Variant::kMExCBCnn;
  switch (c.variant) {
    case Variant::kMExCB:
    case Variant::kMExCBCnn:
    case Variant::kMExCBGru:
      if (recurrent) {
        word_fwd_ = GruParams::create(store, "encoder.word.gru_fwd", c.embed_dim, c.hidden, rng);
        word_bwd_ = GruParams::create(store, "encoder.word.gru_bwd", c.embed_dim, c.hidden, rng);
        word_sat_ = AttentionParams::create(store, "encoder.word.sat", 2 * c.hidden,
                                            c.attention, rng);
      }
      if (conv) {
        word_conv_ = ConvParams::create(store, "encoder.word.conv", c.embed_dim, c.filters,
                                        c.window, rng);
      }
      {
        const size_t ss_in = recurrent ? c.attention : c.filters;
        if (recurrent) {
          sub_fwd_ = GruParams::create(store, "encoder.sub.gru_fwd", ss_in, c.hidden, rng);
          sub_bwd_ = GruParams::create(store, "encoder.sub.gru_bwd", ss_in, c.hidden, rng);
          sub_sat_ = AttentionParams::create(store, "encoder.sub.sat", 2 * c.hidden,
                                             c.attention, rng);
        }
        if (conv) {
          sub_conv_ = ConvParams::create(store, "encoder.sub.conv", ss_in, c.filters,
                                         c.window, rng);
        }
      }
      break;
    case Variant::kBiRnn:
    case Variant::kBiRnnAttn:
      word_fwd_ = GruParams::create(store, "encoder.word.gru_fwd", c.embed_dim, c.hidden, rng);
      word_bwd_ = GruParams::create(store, "encoder.word.gru_bwd", c.embed_dim, c.hidden, rng);
      if (c.variant == Variant::kBiRnnAttn) {
        word_sat_ = AttentionParams::create(store, "encoder.word.sat", 2 * c.hidden,
                                            c.attention, rng);
      }
      break;
    case Variant::kCnnGru:
      for (size_t w : c.baseline_windows) {
        baseline_convs_.push_back(ConvParams::create(
            store, "encoder.baseline.conv" + std::to_string(w), c.embed_dim,
            c.baseline_filters, w, rng));
      }
      word_fwd_ = GruParams::create(store, "encoder.baseline.gru",
                                    c.baseline_filters * c.baseline_windows.size(),
                                    c.hidden, rng);
      break;
  }
}

EncodedViews Encoder::encode(const Tensor& e, const Mask& mask) const {
  if (e.rows() != config_.max_len || e.cols() != config_.embed_dim) {
    throw DimensionError("encoder expects " + std::to_string(config_.max_len) + " x " +
                         std::to_string(config_.embed_dim) + " input, got " +
                         shape_string(e.shape()));
  }
  if (mask.size() != config_.max_len) {
    throw DimensionError("encoder mask length " + std::to_string(mask.size()) +
                         " != " + std::to_string(config_.max_len));
  }
  if (!any_real(mask)) throw DataError("cannot encode an input without real tokens");
  switch (config_.variant) {
    case Variant::kMExCB:
    case Variant::kMExCBCnn:
    case Variant::kMExCBGru:
      return encode_hierarchical(e, mask);
    default:
      return encode_flat(e, mask);
  }
}

EncodedViews Encoder::encode_hierarchical(const Tensor& e, const Mask& mask) const {
  const EncoderConfig& c = config_;
  const bool recurrent = c.variant != Variant::kMExCBCnn;
  const bool conv = c.variant != Variant::kMExCBGru;
  EncodedViews v;
  v.mask = mask;
  v.segment_mask = segment_mask(mask, c.segment);
  Tensor input = zero_padded_rows(e, mask);

  // Word level.
  if (recurrent) {
    v.word_hidden = bigru_encode(input, word_fwd_, word_bwd_, mask);
    AttentionResult sat = self_attention(v.word_hidden, word_sat_, mask);
    v.word_attention = sat.output;
    v.word_attn_weights = sat.weights;
    v.word_segments = subsentence_average(v.word_attention, mask, c.segment);
  }
  if (conv) v.word_conv = segment_cnn(input, word_conv_, mask, c.segment);
  if (recurrent && conv) {
    v.subsentence = add(v.word_segments, v.word_conv);
  } else {
    v.subsentence = recurrent ? v.word_segments : v.word_conv;
  }

  // Sub-sentence level: the same two paths over all P units at once.
  const size_t p = c.segments();
  if (recurrent) {
    Tensor h = bigru_encode(v.subsentence, sub_fwd_, sub_bwd_, v.segment_mask);
    AttentionResult sat = self_attention(h, sub_sat_, v.segment_mask);
    v.sub_attention = sat.output;
    v.sub_attn_weights = sat.weights;
    v.sub_recurrent = subsentence_average(v.sub_attention, v.segment_mask, p);
  }
  if (conv) v.sub_conv = segment_cnn(v.subsentence, sub_conv_, v.segment_mask, p);

  if (recurrent && conv) {
    std::vector<Tensor> parts{v.sub_recurrent, v.sub_conv};
    v.sentence = concat_cols(parts);
  } else {
    v.sentence = recurrent ? v.sub_recurrent : v.sub_conv;
  }
  v.rationale_input = recurrent ? v.sub_recurrent : v.sub_conv;
  return v;
}

EncodedViews Encoder::encode_flat(const Tensor& e, const Mask& mask) const {
  const EncoderConfig& c = config_;
  const size_t n = c.max_len;
  EncodedViews v;
  v.mask = mask;
  v.segment_mask = segment_mask(mask, c.segment);
  Tensor input = zero_padded_rows(e, mask);
  switch (c.variant) {
    case Variant::kBiRnn:
      v.word_hidden = bigru_encode(input, word_fwd_, word_bwd_, mask);
      v.sentence = segment_mean(v.word_hidden, mask, n);
      break;
    case Variant::kBiRnnAttn: {
      v.word_hidden = bigru_encode(input, word_fwd_, word_bwd_, mask);
      AttentionResult sat = self_attention(v.word_hidden, word_sat_, mask);
      v.word_attention = sat.output;
      v.word_attn_weights = sat.weights;
      v.sentence = segment_mean(v.word_attention, mask, n);
      break;
    }
    case Variant::kCnnGru: {
      std::vector<Tensor> maps;
      for (const ConvParams& p : baseline_convs_) {
        maps.push_back(relu(conv1d(input, p.filters, p.bias)));
      }
      Tensor features = concat_cols(maps);
      v.word_hidden = gru_encode(features, word_fwd_, mask, false);
      v.sentence = segment_max(v.word_hidden, mask, n);
      break;
    }
    default:
      throw UsageError("encode_flat called for a hierarchical variant");
  }
  v.rationale_input = v.sentence;
  return v;
}

}  // namespace mtx
