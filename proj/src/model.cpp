#include "morphogen/model.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

namespace morphogen {

void ModelConfig::validate() const {
  if (max_length < 1) throw ValidationError("max_length must be >= 1");
  if (embed_dim < 1 || lstm_units < 1 || lstm_layers < 1)
    throw ValidationError("model dimensions must be >= 1");
  if (vocab_size < 3)
    throw ValidationError("vocab_size must be >= 3 (PAD, EOL, one character)");
}

std::vector<std::string> tensor_names(const ModelConfig& cfg) {
  std::vector<std::string> names;
  names.push_back("embedding");
  for (std::int32_t l = 0; l < cfg.lstm_layers; ++l) {
    const std::string base = "lstm" + std::to_string(l);
    for (const char* dir : {"fwd", "bwd"}) {
      if (!cfg.bidirectional && std::string(dir) == "bwd") continue;
      names.push_back(base + "." + dir + ".W");
      names.push_back(base + "." + dir + ".U");
      names.push_back(base + "." + dir + ".b");
    }
  }
  names.push_back("attention.w");
  names.push_back("attention.b");
  names.push_back("out.W");
  names.push_back("out.b");
  return names;
}

namespace {

// Glorot-uniform fill with fan_in = cols, fan_out = rows (a vector counts as
// one column). Draw order is the tensor's storage order, so results are
// reproducible across platforms.
template <typename Tensor>
void glorot_fill(Tensor& t, Rng& rng) {
  const double fan_in = static_cast<double>(t.cols());
  const double fan_out = static_cast<double>(t.rows());
  const double s = std::sqrt(6.0 / (fan_in + fan_out));
  for (Eigen::Index i = 0; i < t.size(); ++i)
    t.data()[i] = rng.uniform(-s, s);
}

void init_lstm(LstmWeights<double>& w, Rng& rng) {
  glorot_fill(w.W, rng);
  glorot_fill(w.U, rng);
  w.b.setZero();
  const Eigen::Index H = w.hidden_size();
  w.b.segment(H, H).setOnes();  // forget gate bias
}

}  // namespace

ModelParams<double> init_model(const ModelConfig& cfg) {
  cfg.validate();
  ModelParams<double> p = zero_params<double>(cfg);
  Rng rng(mix_seed(cfg.seed, 0x6d6f64656cULL));
  glorot_fill(p.embedding, rng);
  for (std::int32_t l = 0; l < cfg.lstm_layers; ++l) {
    init_lstm(p.lstm_fwd[l], rng);
    if (cfg.bidirectional) init_lstm(p.lstm_bwd[l], rng);
  }
  // The attention projection maps feature_dim -> 1.
  {
    const double s = std::sqrt(6.0 / (static_cast<double>(cfg.feature_dim()) + 1.0));
    for (Eigen::Index i = 0; i < p.attention.w.size(); ++i)
      p.attention.w(i) = rng.uniform(-s, s);
    p.attention.b.setZero();
  }
  glorot_fill(p.out_w, rng);
  p.out_b.setZero();
  return p;
}

Mask derive_mask(std::span<const std::int32_t> context) {
  Mask mask(static_cast<Eigen::Index>(context.size()));
  bool any = false;
  for (std::size_t t = 0; t < context.size(); ++t) {
    mask(static_cast<Eigen::Index>(t)) = context[t] != CharVocab::kPadId;
    any = any || mask(static_cast<Eigen::Index>(t));
  }
  if (!any && mask.size() > 0) mask(mask.size() - 1) = true;
  return mask;
}

Vecd forward(const ModelParams<double>& params, const ModelConfig& cfg,
             std::span<const std::int32_t> context) {
  if (static_cast<std::int32_t>(context.size()) != cfg.max_length)
    throw DimensionError("forward: context length " +
                         std::to_string(context.size()) + " != max_length " +
                         std::to_string(cfg.max_length));
  const Mask mask = derive_mask(context);

  Matd x = embedding_forward<double>(context, params.embedding);
  Matd features(cfg.max_length, cfg.feature_dim());
  features.leftCols(cfg.embed_dim) = x;
  Eigen::Index col = cfg.embed_dim;
  for (std::int32_t l = 0; l < cfg.lstm_layers; ++l) {
    Matd out;
    if (cfg.bidirectional) {
      out = bilstm_forward(x, params.lstm_fwd[l], params.lstm_bwd[l], mask);
    } else {
      // Forward direction only; reuse the bi-directional kernel with a zero
      // backward half and drop it.
      Matd both = bilstm_forward(x, params.lstm_fwd[l], params.lstm_fwd[l], mask);
      out = both.leftCols(cfg.lstm_units);
    }
    features.middleCols(col, out.cols()) = out;
    col += out.cols();
    x = std::move(out);
  }
  // Zero feature rows at masked positions (their LSTM outputs are already
  // zero, but the embedding skip-connection is not).
  for (Eigen::Index t = 0; t < features.rows(); ++t) {
    if (!mask(t)) features.row(t).setZero();
  }
  Vecd pooled = attention_weighted_average(features, params.attention, mask);
  return dense_softmax(pooled, params.out_w, params.out_b);
}

// --- Checkpoints -----------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'M', 'G', 'C', 'K'};
constexpr std::uint32_t kFormatVersion = 1;

nlohmann::json config_json(const ModelConfig& cfg) {
  return {{"max_length", cfg.max_length},   {"embed_dim", cfg.embed_dim},
          {"lstm_units", cfg.lstm_units},   {"lstm_layers", cfg.lstm_layers},
          {"bidirectional", cfg.bidirectional}, {"vocab_size", cfg.vocab_size},
          {"seed", cfg.seed}};
}

ModelConfig config_from(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.max_length = j.at("max_length").get<std::int32_t>();
  cfg.embed_dim = j.at("embed_dim").get<std::int32_t>();
  cfg.lstm_units = j.at("lstm_units").get<std::int32_t>();
  cfg.lstm_layers = j.at("lstm_layers").get<std::int32_t>();
  cfg.bidirectional = j.at("bidirectional").get<bool>();
  cfg.vocab_size = j.at("vocab_size").get<std::int32_t>();
  cfg.seed = j.value("seed", std::uint64_t{0});
  return cfg;
}

void write_f64_le(std::ofstream& out, const double* data, std::size_t count) {
  static_assert(sizeof(double) == 8);
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data),
              static_cast<std::streamsize>(count * 8));
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      std::uint64_t bits;
      std::memcpy(&bits, &data[i], 8);
      char buf[8];
      for (int k = 0; k < 8; ++k) buf[k] = static_cast<char>(bits >> (8 * k));
      out.write(buf, 8);
    }
  }
}

double read_f64_le(const char* p) {
  std::uint64_t bits = 0;
  for (int k = 0; k < 8; ++k)
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[k])) << (8 * k);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

std::string config_to_json(const ModelConfig& cfg) { return config_json(cfg).dump(); }

ModelConfig config_from_json(const std::string& text) {
  return config_from(nlohmann::json::parse(text));
}

void save_checkpoint(const ModelParams<double>& params, const ModelConfig& cfg,
                     const CharVocab& vocab, const std::string& path) {
  cfg.validate();
  nlohmann::json header;
  header["format_version"] = kFormatVersion;
  header["config"] = config_json(cfg);
  header["vocab"] = nlohmann::json::parse(vocab.to_json());

  const auto names = tensor_names(cfg);
  nlohmann::json tensors = nlohmann::json::array();
  std::size_t offset = 0;
  std::size_t idx = 0;
  for_each_tensor(params, [&](const auto& t) {
    const std::size_t bytes = static_cast<std::size_t>(t.size()) * 8;
    tensors.push_back({{"name", names.at(idx++)},
                       {"rows", t.rows()},
                       {"cols", t.cols()},
                       {"offset", offset},
                       {"bytes", bytes}});
    offset += bytes;
  });
  header["tensors"] = std::move(tensors);

  const std::string header_text = header.dump();
  if (header_text.size() > std::numeric_limits<std::uint32_t>::max())
    throw CheckpointError("header too large");

  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint: " + path);
  out.write(kMagic, 4);
  const std::uint32_t header_len = static_cast<std::uint32_t>(header_text.size());
  char len_buf[4];
  for (int k = 0; k < 4; ++k) len_buf[k] = static_cast<char>(header_len >> (8 * k));
  out.write(len_buf, 4);
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  for_each_tensor(params, [&](const auto& t) {
    write_f64_le(out, t.data(), static_cast<std::size_t>(t.size()));
  });
  if (!out) throw CheckpointError("write failed: " + path);
}

ModelBundle load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);
  std::string raw((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());

  if (raw.size() < 8 || std::memcmp(raw.data(), kMagic, 4) != 0)
    throw CheckpointError("not a checkpoint file: " + path);
  std::uint32_t header_len = 0;
  for (int k = 0; k < 4; ++k)
    header_len |= static_cast<std::uint32_t>(
                      static_cast<unsigned char>(raw[4 + static_cast<std::size_t>(k)]))
                  << (8 * k);
  if (raw.size() < 8 + static_cast<std::size_t>(header_len))
    throw CheckpointTruncatedError("truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(raw.substr(8, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed header JSON: ") + e.what());
  }

  const std::uint32_t version = header.at("format_version").get<std::uint32_t>();
  if (version != kFormatVersion)
    throw CheckpointVersionError("unsupported checkpoint format version " +
                                 std::to_string(version));

  ModelBundle bundle;
  bundle.config = config_from(header.at("config"));
  bundle.config.validate();
  bundle.vocab = CharVocab::from_json(header.at("vocab").dump());
  if (bundle.vocab.size() != bundle.config.vocab_size)
    throw CheckpointManifestError("vocab size disagrees with config");
  bundle.params = zero_params<double>(bundle.config);

  const auto names = tensor_names(bundle.config);
  const auto& tensors = header.at("tensors");
  if (!tensors.is_array() || tensors.size() != names.size())
    throw CheckpointManifestError("tensor manifest has " +
                                  std::to_string(tensors.size()) +
                                  " entries, expected " +
                                  std::to_string(names.size()));

  const char* data = raw.data() + 8 + header_len;
  const std::size_t data_size = raw.size() - 8 - header_len;
  std::size_t expected_offset = 0;
  std::size_t idx = 0;
  for_each_tensor(bundle.params, [&](auto& t) {
    const auto& entry = tensors.at(idx);
    const std::string name = entry.at("name").get<std::string>();
    const auto rows = entry.at("rows").get<Eigen::Index>();
    const auto cols = entry.at("cols").get<Eigen::Index>();
    const auto offset = entry.at("offset").get<std::size_t>();
    const auto bytes = entry.at("bytes").get<std::size_t>();
    if (name != names[idx])
      throw CheckpointManifestError("tensor " + std::to_string(idx) +
                                    " named '" + name + "', expected '" +
                                    names[idx] + "'");
    if (rows != t.rows() || cols != t.cols())
      throw CheckpointManifestError(
          "tensor '" + name + "' has shape " + std::to_string(rows) + "x" +
          std::to_string(cols) + ", config requires " + std::to_string(t.rows()) +
          "x" + std::to_string(t.cols()));
    if (offset != expected_offset || bytes != static_cast<std::size_t>(t.size()) * 8)
      throw CheckpointManifestError("tensor '" + name + "' has inconsistent layout");
    if (offset + bytes > data_size)
      throw CheckpointTruncatedError("truncated tensor data (tensor '" + name +
                                     "')");
    for (Eigen::Index i = 0; i < t.size(); ++i)
      t.data()[i] = read_f64_le(data + offset + static_cast<std::size_t>(i) * 8);
    expected_offset += bytes;
    ++idx;
  });
  if (expected_offset != data_size)
    throw CheckpointManifestError("trailing bytes after tensor data");
  return bundle;
}

}  // namespace morphogen
