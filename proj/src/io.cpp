/* Copyright (c) 2026 The scprune Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

#include "scprune/io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <type_traits>

#include "scprune/error.hpp"
#include "scprune/util.hpp"

namespace scprune::io {

namespace {

constexpr char kModelMagic[4] = {'S', 'C', 'P', 'M'};
constexpr char kTensorMagic[4] = {'S', 'C', 'T', 'N'};

enum Tag : std::uint8_t {
  kConv = 0,
  kRelu = 1,
  kMaxPool = 2,
  kFc = 3,
  kBatchNorm = 4,
  kBlock = 5,
};

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void bytes(const void* data, std::size_t n) { out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n)); }

  template <typename T>
  void uint(T v) {
    std::uint8_t buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<std::uint8_t>(v >> (8 * i));
    bytes(buf, sizeof(T));
  }

  void u8(std::uint8_t v) { uint(v); }
  void u16(std::uint16_t v) { uint(v); }
  void u32(std::uint32_t v) { uint(v); }
  void u64(std::uint64_t v) { uint(v); }

  void u32_size(std::size_t v, const std::string& what) {
    if (v > 0xffffffffull) fail(ErrorCode::kFormat, what + " does not fit in u32");
    u32(static_cast<std::uint32_t>(v));
  }

  void name(const std::string& s) {
    if (s.size() > 0xffff) fail(ErrorCode::kFormat, "name longer than 65535 bytes: " + s.substr(0, 32));
    u16(static_cast<std::uint16_t>(s.size()));
    bytes(s.data(), s.size());
  }

  void floats(std::span<const float> values) {
    if constexpr (std::endian::native == std::endian::little) {
      bytes(values.data(), values.size() * sizeof(float));
    } else {
      for (float v : values) u32(std::bit_cast<std::uint32_t>(v));
    }
  }

  void blob(std::span<const float> values) {
    u64(values.size());
    floats(values);
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, std::uint64_t size) : in_(in), size_(size) {}

  std::uint64_t offset() const { return offset_; }
  std::uint64_t remaining() const { return size_ - offset_; }
  void set_context(std::string context) { context_ = std::move(context); }

  [[noreturn]] void error(const std::string& message) const {
    std::string where = "format error at byte offset " + std::to_string(offset_);
    if (!context_.empty()) where += " (" + context_ + ")";
    fail(ErrorCode::kFormat, where + ": " + message);
  }

  void bytes(void* dst, std::size_t n, const char* what) {
    if (n > remaining()) error(std::string("truncated ") + what);
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (!in_) error(std::string("read failed for ") + what);
    offset_ += n;
  }

  template <typename T>
  T uint(const char* what) {
    std::uint8_t buf[sizeof(T)];
    bytes(buf, sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(buf[i]) << (8 * i));
    return v;
  }

  std::uint8_t u8(const char* what) { return uint<std::uint8_t>(what); }
  std::uint16_t u16(const char* what) { return uint<std::uint16_t>(what); }
  std::uint32_t u32(const char* what) { return uint<std::uint32_t>(what); }
  std::uint64_t u64(const char* what) { return uint<std::uint64_t>(what); }

  std::string name(const char* what) {
    const std::uint16_t n = u16(what);
    std::string s(n, '\0');
    bytes(s.data(), n, what);
    return s;
  }

  std::vector<float> floats(std::uint64_t count, const char* what) {
    if (count > remaining() / sizeof(float)) error(std::string("truncated ") + what);
    std::vector<float> out(static_cast<std::size_t>(count));
    bytes(out.data(), out.size() * sizeof(float), what);
    if constexpr (std::endian::native != std::endian::little) {
      for (float& v : out) {
        std::uint32_t u;
        std::memcpy(&u, &v, sizeof u);
        u = (u >> 24) | ((u >> 8) & 0xff00u) | ((u << 8) & 0xff0000u) | (u << 24);
        std::memcpy(&v, &u, sizeof u);
      }
    }
    for (float v : out) {
      if (!std::isfinite(v)) error(std::string("non-finite value in ") + what);
    }
    return out;
  }

  std::vector<float> blob(std::uint64_t expected, bool optional, const char* what) {
    const std::uint64_t count = u64(what);
    if (count != expected && !(optional && count == 0)) {
      error(std::string(what) + " declares " + std::to_string(count) + " elements, expected " +
            std::to_string(expected));
    }
    return floats(count, what);
  }

 private:
  std::istream& in_;
  std::uint64_t size_;
  std::uint64_t offset_ = 0;
  std::string context_;
};

std::ifstream open_input(const fs::path& path, std::uint64_t& size) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) fail(ErrorCode::kIo, "cannot open '" + path.string() + "': no such file");
  size = fs::file_size(path, ec);
  if (ec) fail(ErrorCode::kIo, "cannot stat '" + path.string() + "': " + ec.message());
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  return in;
}

// Writes through a sibling temporary file so a failed save leaves nothing behind.
template <typename Fn>
void write_atomically(const fs::path& path, Fn&& body) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kIo, "cannot write '" + path.string() + "'");
    try {
      body(out);
    } catch (...) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw;
    }
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      fail(ErrorCode::kIo, "write failed for '" + path.string() + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(ErrorCode::kIo, "cannot move output into place at '" + path.string() + "'");
  }
}

void write_model(const nn::ModelGraph& model, std::ostream& out) {
  nn::validate(model);
  Writer w(out);
  w.bytes(kModelMagic, 4);
  w.u32(kModelFormatVersion);
  w.u32_size(model.layers.size() + model.blocks.size(), "record count");
  w.u32_size(model.input_shape.size(), "input rank");
  for (std::size_t d : model.input_shape) w.u32_size(d, "input dimension");

  for (const auto& layer : model.layers) {
    w.name(nn::layer_name(layer));
    if (const auto* l = std::get_if<nn::ConvLayer>(&layer)) {
      w.u8(kConv);
      for (std::size_t v : {l->c_out(), l->c_in(), l->k_h(), l->k_w(), l->stride, l->padding}) {
        w.u32_size(v, "conv parameter");
      }
      w.blob(l->weights.data());
      w.blob(l->bias);
    } else if (std::holds_alternative<nn::ReluLayer>(layer)) {
      w.u8(kRelu);
    } else if (const auto* l = std::get_if<nn::MaxPoolLayer>(&layer)) {
      w.u8(kMaxPool);
      w.u32_size(l->kernel, "pool kernel");
      w.u32_size(l->stride, "pool stride");
    } else if (const auto* l = std::get_if<nn::FcLayer>(&layer)) {
      w.u8(kFc);
      w.u32_size(l->weights.dim(0), "fc outputs");
      w.u32_size(l->weights.dim(1), "fc inputs");
      w.blob(l->weights.data());
      w.blob(l->bias);
    } else if (const auto* l = std::get_if<nn::BatchNormLayer>(&layer)) {
      w.u8(kBatchNorm);
      w.u32_size(l->gamma.size(), "batchnorm channels");
      w.u32(std::bit_cast<std::uint32_t>(l->epsilon));
      w.blob(l->gamma);
      w.blob(l->beta);
      w.blob(l->mean);
      w.blob(l->var);
    }
  }
  for (const auto& block : model.blocks) {
    w.name(block.block_id);
    w.u8(kBlock);
    w.u32_size(block.prunable_prefix, "prunable prefix");
    w.u32_size(block.conv_layer_names.size(), "block conv count");
    for (const auto& n : block.conv_layer_names) w.name(n);
  }
}

nn::ModelGraph read_model(std::istream& in, std::uint64_t size) {
  Reader r(in, size);
  char magic[4];
  r.bytes(magic, 4, "magic");
  if (std::memcmp(magic, kModelMagic, 4) != 0) {
    fail(ErrorCode::kFormat, "format error at byte offset 0: bad magic (expected SCPM)");
  }
  const std::uint32_t version = r.u32("version");
  if (version != kModelFormatVersion) {
    fail(ErrorCode::kFormat, "format error at byte offset 4: unsupported version " + std::to_string(version));
  }
  const std::uint32_t records = r.u32("record count");
  const std::uint32_t rank = r.u32("input rank");
  nn::ModelGraph model;
  for (std::uint32_t i = 0; i < rank; ++i) model.input_shape.push_back(r.u32("input dimension"));

  for (std::uint32_t i = 0; i < records; ++i) {
    r.set_context("record " + std::to_string(i));
    std::string name = r.name("layer name");
    r.set_context("layer '" + name + "'");
    const std::uint64_t tag_offset = r.offset();
    const std::uint8_t tag = r.u8("type tag");
    switch (tag) {
      case kConv: {
        nn::ConvLayer l;
        l.name = std::move(name);
        std::uint32_t dims[6];
        for (auto& d : dims) d = r.u32("conv parameters");
        const nn::Shape shape{dims[0], dims[1], dims[2], dims[3]};
        l.weights = nn::Tensor(shape, r.blob(nn::shape_size(shape), false, "conv weights"));
        l.bias = r.blob(dims[0], true, "conv bias");
        l.stride = dims[4];
        l.padding = dims[5];
        model.layers.emplace_back(std::move(l));
        break;
      }
      case kRelu:
        model.layers.emplace_back(nn::ReluLayer{std::move(name)});
        break;
      case kMaxPool: {
        nn::MaxPoolLayer l;
        l.name = std::move(name);
        l.kernel = r.u32("pool kernel");
        l.stride = r.u32("pool stride");
        model.layers.emplace_back(std::move(l));
        break;
      }
      case kFc: {
        nn::FcLayer l;
        l.name = std::move(name);
        const std::uint32_t out = r.u32("fc outputs");
        const std::uint32_t inputs = r.u32("fc inputs");
        l.weights = nn::Tensor({out, inputs}, r.blob(std::uint64_t{out} * inputs, false, "fc weights"));
        l.bias = r.blob(out, true, "fc bias");
        model.layers.emplace_back(std::move(l));
        break;
      }
      case kBatchNorm: {
        nn::BatchNormLayer l;
        l.name = std::move(name);
        const std::uint32_t c = r.u32("batchnorm channels");
        l.epsilon = std::bit_cast<float>(r.u32("batchnorm epsilon"));
        l.gamma = r.blob(c, false, "batchnorm gamma");
        l.beta = r.blob(c, false, "batchnorm beta");
        l.mean = r.blob(c, false, "batchnorm mean");
        l.var = r.blob(c, false, "batchnorm var");
        model.layers.emplace_back(std::move(l));
        break;
      }
      case kBlock: {
        nn::BlockSpec b;
        b.block_id = std::move(name);
        b.prunable_prefix = r.u32("prunable prefix");
        const std::uint32_t n = r.u32("block conv count");
        for (std::uint32_t k = 0; k < n; ++k) b.conv_layer_names.push_back(r.name("block conv name"));
        model.blocks.push_back(std::move(b));
        break;
      }
      default:
        fail(ErrorCode::kFormat, "format error at byte offset " + std::to_string(tag_offset) + " (layer '" + name +
                                     "'): unknown type tag " + std::to_string(tag));
    }
  }
  r.set_context({});
  if (r.remaining() != 0) r.error(std::to_string(r.remaining()) + " trailing bytes");
  try {
    nn::validate(model);
  } catch (const Error& e) {
    fail(ErrorCode::kFormat, std::string("model file is inconsistent: ") + e.what());
  }
  return model;
}

}  // namespace

nn::ModelGraph load_model(const fs::path& path) {
  std::uint64_t size = 0;
  auto in = open_input(path, size);
  return read_model(in, size);
}

void save_model(const nn::ModelGraph& model, const fs::path& path) {
  nn::validate(model);
  write_atomically(path, [&](std::ostream& out) { write_model(model, out); });
}

std::vector<std::uint8_t> encode_model(const nn::ModelGraph& model) {
  std::ostringstream out(std::ios::binary);
  write_model(model, out);
  const std::string s = out.str();
  return {s.begin(), s.end()};
}

nn::Tensor load_tensor(const fs::path& path) {
  std::uint64_t size = 0;
  auto in = open_input(path, size);
  Reader r(in, size);
  r.set_context(path.filename().string());
  char magic[4];
  r.bytes(magic, 4, "magic");
  if (std::memcmp(magic, kTensorMagic, 4) != 0) {
    fail(ErrorCode::kFormat, "format error at byte offset 0 (" + path.filename().string() +
                                 "): bad magic (expected SCTN)");
  }
  const std::uint32_t rank = r.u32("rank");
  nn::Shape shape;
  for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(r.u32("dimension"));
  auto data = r.floats(nn::shape_size(shape), "tensor data");
  if (r.remaining() != 0) r.error(std::to_string(r.remaining()) + " trailing bytes");
  return nn::Tensor(std::move(shape), std::move(data));
}

void save_tensor(const nn::Tensor& tensor, const fs::path& path) {
  write_atomically(path, [&](std::ostream& out) {
    Writer w(out);
    w.bytes(kTensorMagic, 4);
    w.u32_size(tensor.rank(), "rank");
    for (std::size_t d : tensor.shape()) w.u32_size(d, "dimension");
    w.floats(tensor.data());
  });
}

Dataset load_dataset(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) fail(ErrorCode::kIo, "tensor directory '" + dir.string() + "' does not exist");
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".sctn") names.push_back(entry.path().filename().string());
  }
  if (ec) fail(ErrorCode::kIo, "cannot list '" + dir.string() + "': " + ec.message());
  if (names.empty()) fail(ErrorCode::kInput, "tensor directory '" + dir.string() + "' contains no .sctn files");
  std::sort(names.begin(), names.end());

  Dataset out;
  for (const auto& name : names) {
    nn::Tensor t = load_tensor(dir / name);
    if (!out.tensors.empty() && t.shape() != out.tensors.front().shape()) {
      fail(ErrorCode::kInput, "tensor '" + name + "' has shape " + nn::shape_string(t.shape()) + ", expected " +
                                  nn::shape_string(out.tensors.front().shape()) + " (from '" + out.names.front() +
                                  "')");
    }
    out.names.push_back(name);
    out.tensors.push_back(std::move(t));
  }
  return out;
}

std::vector<nn::Tensor> load_calibration(const fs::path& dir, std::size_t limit, std::uint64_t seed) {
  Dataset data = load_dataset(dir);
  if (limit == 0 || data.tensors.size() <= limit) return std::move(data.tensors);
  Rng rng(seed);
  std::vector<nn::Tensor> out;
  for (std::size_t i : rng.sample_without_replacement(data.tensors.size(), limit)) {
    out.push_back(std::move(data.tensors[i]));
  }
  return out;
}

std::map<std::string, std::size_t> load_labels(const fs::path& path) {
  const Json doc = parse_json(read_text(path), path.string());
  if (!doc.is_object()) fail(ErrorCode::kFormat, "labels file '" + path.string() + "' must be a JSON object");
  std::map<std::string, std::size_t> out;
  for (const auto& [name, value] : doc.items()) {
    if (!value.is_number_unsigned()) {
      fail(ErrorCode::kFormat, "label for '" + name + "' must be a nonnegative integer");
    }
    out[name] = value.get<std::size_t>();
  }
  return out;
}

std::vector<std::size_t> labels_for(const Dataset& data, const std::map<std::string, std::size_t>& labels) {
  std::vector<std::size_t> out;
  out.reserve(data.names.size());
  for (const auto& name : data.names) {
    const auto it = labels.find(name);
    if (it == labels.end()) fail(ErrorCode::kInput, "no label for tensor file '" + name + "'");
    out.push_back(it->second);
  }
  return out;
}

double evaluate_topk(const nn::ModelGraph& model, std::span<const nn::Tensor> inputs,
                     std::span<const std::size_t> labels, std::size_t k, std::size_t threads) {
  if (k < 1) fail(ErrorCode::kParameter, "top-k: k must be at least 1");
  if (inputs.size() != labels.size()) fail(ErrorCode::kInput, "top-k: input and label counts differ");
  if (inputs.empty()) fail(ErrorCode::kInput, "top-k: no inputs");
  std::vector<char> hit(inputs.size(), 0);
  parallel_for(inputs.size(), threads, [&](std::size_t i) {
    const nn::Tensor logits = nn::forward(model, inputs[i]).output;
    const std::size_t truth = labels[i];
    if (truth >= logits.size()) {
      fail(ErrorCode::kInput, "label " + std::to_string(truth) + " exceeds class count " +
                                  std::to_string(logits.size()));
    }
    std::size_t ahead = 0;
    for (std::size_t j = 0; j < logits.size(); ++j) {
      if (logits[j] > logits[truth] || (logits[j] == logits[truth] && j < truth)) ++ahead;
    }
    hit[i] = ahead < k ? 1 : 0;
  });
  const auto hits = static_cast<double>(std::count(hit.begin(), hit.end(), 1));
  return hits / static_cast<double>(inputs.size());
}

// ---------------------------------------------------------------------------

Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::kFormat, "cannot parse " + what + ": " + e.what());
  }
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string dump_json(const Json& doc) { return doc.dump(2) + "\n"; }

void write_text(const fs::path& path, const std::string& text) {
  write_atomically(path, [&](std::ostream& out) { out << text; });
}

namespace {

template <typename T>
T get_field(const Json& doc, const char* key, const std::string& where) {
  if (!doc.is_object() || !doc.contains(key)) fail(ErrorCode::kFormat, where + ": missing '" + key + "'");
  const Json& value = doc[key];
  bool ok = true;
  if constexpr (std::is_same_v<T, bool>) {
    ok = value.is_boolean();
  } else if constexpr (std::is_integral_v<T>) {
    ok = value.is_number_unsigned();
  } else if constexpr (std::is_floating_point_v<T>) {
    ok = value.is_number();
  } else {
    ok = value.is_string();
  }
  if (!ok) fail(ErrorCode::kFormat, where + ": '" + key + "' has the wrong type");
  try {
    return value.get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, where + ": bad or missing '" + key + "': " + e.what());
  }
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) fail(ErrorCode::kConvergence, std::string("report field '") + what + "' is not finite");
}

Json target_json(const char* key, const std::string& name, const std::optional<double>& ratio,
                 const std::optional<std::size_t>& c_prime) {
  Json j;
  j[key] = name;
  if (ratio) j["ratio"] = *ratio;
  if (c_prime) j["c_prime"] = *c_prime;
  return j;
}

void read_target(const Json& j, const std::string& where, std::optional<double>& ratio,
                 std::optional<std::size_t>& c_prime) {
  if (j.contains("ratio")) ratio = get_field<double>(j, "ratio", where);
  if (j.contains("c_prime")) c_prime = get_field<std::size_t>(j, "c_prime", where);
  if (ratio.has_value() == c_prime.has_value()) {
    fail(ErrorCode::kFormat, where + ": set exactly one of 'ratio' and 'c_prime'");
  }
}

}  // namespace

Json config_to_json(const RunConfig& cfg) {
  Json j;
  j["alpha"] = cfg.alpha;
  j["ssc_max_iter"] = cfg.ssc_max_iter;
  j["ssc_tol"] = cfg.ssc_tol;
  j["ridge"] = cfg.ridge;
  j["max_rows"] = cfg.max_rows;
  j["seed"] = cfg.seed;
  j["kmeans_restarts"] = cfg.kmeans_restarts;
  j["threads"] = cfg.threads;
  j["cluster_on_original"] = cfg.cluster_on_original;
  return j;
}

RunConfig config_from_json(const Json& doc) {
  if (!doc.is_object()) fail(ErrorCode::kFormat, "config must be a JSON object");
  RunConfig cfg;
  const std::string where = "config";
  for (const auto& [key, value] : doc.items()) {
    if (key == "alpha") cfg.alpha = get_field<double>(doc, "alpha", where);
    else if (key == "ssc_max_iter") cfg.ssc_max_iter = get_field<std::size_t>(doc, "ssc_max_iter", where);
    else if (key == "ssc_tol") cfg.ssc_tol = get_field<double>(doc, "ssc_tol", where);
    else if (key == "ridge") cfg.ridge = get_field<double>(doc, "ridge", where);
    else if (key == "max_rows") cfg.max_rows = get_field<std::size_t>(doc, "max_rows", where);
    else if (key == "seed") cfg.seed = get_field<std::uint64_t>(doc, "seed", where);
    else if (key == "kmeans_restarts") cfg.kmeans_restarts = get_field<std::size_t>(doc, "kmeans_restarts", where);
    else if (key == "threads") cfg.threads = get_field<std::size_t>(doc, "threads", where);
    else if (key == "cluster_on_original") cfg.cluster_on_original = get_field<bool>(doc, "cluster_on_original", where);
    else fail(ErrorCode::kFormat, "config: unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

Json strategy_to_json(const pruner::PruneStrategy& strategy) {
  Json j;
  j["layers"] = Json::array();
  for (const auto& t : strategy.layers) j["layers"].push_back(target_json("lower", t.lower_layer, t.ratio, t.c_prime));
  j["blocks"] = Json::array();
  for (const auto& t : strategy.blocks) j["blocks"].push_back(target_json("block", t.block_id, t.ratio, t.c_prime));
  return j;
}

pruner::PruneStrategy strategy_from_json(const Json& doc) {
  if (!doc.is_object()) fail(ErrorCode::kFormat, "strategy must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (key != "layers" && key != "blocks" && key != "comment") {
      fail(ErrorCode::kFormat, "strategy: unknown key '" + key + "'");
    }
  }
  pruner::PruneStrategy s;
  if (doc.contains("layers")) {
    if (!doc["layers"].is_array()) fail(ErrorCode::kFormat, "strategy: 'layers' must be an array");
    for (const auto& j : doc["layers"]) {
      pruner::LayerTarget t;
      t.lower_layer = get_field<std::string>(j, "lower", "strategy layer entry");
      read_target(j, "strategy entry '" + t.lower_layer + "'", t.ratio, t.c_prime);
      s.layers.push_back(std::move(t));
    }
  }
  if (doc.contains("blocks")) {
    if (!doc["blocks"].is_array()) fail(ErrorCode::kFormat, "strategy: 'blocks' must be an array");
    for (const auto& j : doc["blocks"]) {
      pruner::BlockTarget t;
      t.block_id = get_field<std::string>(j, "block", "strategy block entry");
      read_target(j, "strategy block '" + t.block_id + "'", t.ratio, t.c_prime);
      s.blocks.push_back(std::move(t));
    }
  }
  return s;
}

Json report_to_json(const pruner::PruneReport& report, const RunConfig& cfg, const pruner::PruneStrategy& strategy) {
  Json doc;
  doc["toolkit"] = {{"name", kToolkitName}, {"version", kToolkitVersion}};
  doc["fine_tuned"] = false;
  doc["config"] = config_to_json(cfg);
  doc["strategy"] = strategy_to_json(strategy);
  doc["records"] = Json::array();
  for (const auto& r : report.records) {
    check_finite(r.recon_error_before, "recon_error_before");
    check_finite(r.recon_error_after, "recon_error_after");
    Json j;
    j["upper_layer"] = r.upper_layer;
    j["lower_layer"] = r.lower_layer;
    j["selector"] = r.selector;
    j["c"] = r.c;
    j["c_prime"] = r.c_prime;
    j["speed_up_ratio"] = r.speed_up_ratio;
    j["cluster_sizes"] = r.cluster_sizes;
    j["recon_error_before"] = r.recon_error_before;
    j["recon_error_after"] = r.recon_error_after;
    j["params_before"] = r.params_before;
    j["params_after"] = r.params_after;
    j["flops_before"] = r.flops_before;
    j["flops_after"] = r.flops_after;
    if (r.ssc) {
      check_finite(r.ssc->final_objective, "ssc.final_objective");
      j["ssc"] = {{"lambda", r.ssc->lambda},
                  {"iterations", r.ssc->iterations},
                  {"final_objective", r.ssc->final_objective}};
    }
    doc["records"].push_back(std::move(j));
  }
  doc["totals"] = {{"params_before", report.totals_before.params},
                   {"params_after", report.totals_after.params},
                   {"flops_before", report.totals_before.flops},
                   {"flops_after", report.totals_after.flops}};
  if (report.accuracy_before && report.accuracy_after) {
    doc["accuracy"] = {{"before", *report.accuracy_before},
                       {"after", *report.accuracy_after},
                       {"delta", *report.accuracy_before - *report.accuracy_after}};
  }
  return doc;
}

pruner::PruneReport report_from_json(const Json& doc) {
  pruner::PruneReport report;
  try {
    for (const auto& j : doc.at("records")) {
      pruner::PruneRecord r;
      r.upper_layer = j.at("upper_layer").get<std::string>();
      r.lower_layer = j.at("lower_layer").get<std::string>();
      r.selector = j.at("selector").get<std::string>();
      r.c = j.at("c").get<std::size_t>();
      r.c_prime = j.at("c_prime").get<std::size_t>();
      r.speed_up_ratio = j.at("speed_up_ratio").get<double>();
      r.cluster_sizes = j.at("cluster_sizes").get<std::vector<std::size_t>>();
      r.recon_error_before = j.at("recon_error_before").get<double>();
      r.recon_error_after = j.at("recon_error_after").get<double>();
      r.params_before = j.at("params_before").get<std::uint64_t>();
      r.params_after = j.at("params_after").get<std::uint64_t>();
      r.flops_before = j.at("flops_before").get<std::uint64_t>();
      r.flops_after = j.at("flops_after").get<std::uint64_t>();
      if (j.contains("ssc")) {
        const auto& s = j["ssc"];
        r.ssc = pruner::SscDiagnostics{s.at("lambda").get<double>(), s.at("iterations").get<std::size_t>(),
                                       s.at("final_objective").get<double>()};
      }
      report.records.push_back(std::move(r));
    }
    const auto& t = doc.at("totals");
    report.totals_before = {t.at("params_before").get<std::uint64_t>(), t.at("flops_before").get<std::uint64_t>()};
    report.totals_after = {t.at("params_after").get<std::uint64_t>(), t.at("flops_after").get<std::uint64_t>()};
    if (doc.contains("accuracy")) {
      report.accuracy_before = doc["accuracy"].at("before").get<double>();
      report.accuracy_after = doc["accuracy"].at("after").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("malformed report: ") + e.what());
  }
  return report;
}

Json comparison_to_json(const baselines::ComparisonTable& table, const RunConfig& cfg) {
  Json doc;
  doc["toolkit"] = {{"name", kToolkitName}, {"version", kToolkitVersion}};
  doc["fine_tuned"] = false;
  doc["config"] = config_to_json(cfg);
  doc["upper_layer"] = table.upper_layer;
  doc["lower_layer"] = table.lower_layer;
  if (table.original_accuracy) doc["original_accuracy"] = *table.original_accuracy;
  doc["rows"] = Json::array();
  for (const auto& r : table.rows) {
    check_finite(r.recon_error_after, "recon_error_after");
    Json j;
    j["selector"] = r.selector;
    j["ratio"] = r.ratio;
    j["c"] = r.c;
    j["c_prime"] = r.c_prime;
    j["recon_error_before"] = r.recon_error_before;
    j["recon_error_after"] = r.recon_error_after;
    if (r.accuracy) j["accuracy"] = *r.accuracy;
    doc["rows"].push_back(std::move(j));
  }
  return doc;
}

}  // namespace scprune::io
