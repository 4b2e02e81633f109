#pragma once

// Model: architecture descriptor plus an ordered set of named tensors, the
// builders for the spherical network, the planar baseline and a bare
// FC+softmax classifier, and the binary checkpoint format.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "scnn/conv.hpp"
#include "scnn/tape.hpp"

namespace scnn {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

enum class ModelKind { spherical, planar, linear };

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::spherical: return "spherical";
    case ModelKind::planar: return "planar";
    case ModelKind::linear: return "linear";
  }
  return "?";
}

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "spherical") return ModelKind::spherical;
  if (s == "planar") return ModelKind::planar;
  if (s == "linear") return ModelKind::linear;
  throw ValidationError("unknown model kind '" + s + "'");
}

struct TrunkLayer {
  int bandwidth = 0;  // output bandwidth; unused for planar layers
  int channels = 0;
};

struct Architecture {
  ModelKind kind = ModelKind::spherical;
  int input_bandwidth = 0;  // spherical and planar inputs are 2b x 2b matrices
  int features = 0;         // linear models only
  std::vector<TrunkLayer> layers;
  int classes = 2;

  int trunk_channels() const { return layers.empty() ? 0 : layers.back().channels; }
  int head_inputs() const { return kind == ModelKind::linear ? features : 2 * trunk_channels(); }

  // e.g. "kind=spherical;input_bandwidth=16;layers=8x8,4x16,2x32;classes=2"
  std::string to_text() const {
    std::ostringstream os;
    os << "kind=" << to_string(kind) << ";";
    if (kind == ModelKind::linear) {
      os << "features=" << features << ";";
    } else {
      os << "input_bandwidth=" << input_bandwidth << ";layers=";
      for (std::size_t i = 0; i < layers.size(); ++i) {
        if (i) os << ",";
        if (kind == ModelKind::spherical) os << layers[i].bandwidth << "x";
        os << layers[i].channels;
      }
      os << ";";
    }
    os << "classes=" << classes;
    return os.str();
  }

  static Architecture parse(const std::string& text) {
    Architecture a;
    std::map<std::string, std::string> kv;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ';')) {
      auto eq = item.find('=');
      if (eq == std::string::npos) throw ValidationError("architecture: malformed entry '" + item + "'");
      kv[item.substr(0, eq)] = item.substr(eq + 1);
    }
    auto need = [&](const std::string& k) {
      auto it = kv.find(k);
      if (it == kv.end()) throw ValidationError("architecture: missing '" + k + "'");
      return it->second;
    };
    try {
      a.kind = parse_model_kind(need("kind"));
      a.classes = std::stoi(need("classes"));
      if (a.kind == ModelKind::linear) {
        a.features = std::stoi(need("features"));
      } else {
        a.input_bandwidth = std::stoi(need("input_bandwidth"));
        std::stringstream ls(need("layers"));
        std::string tok;
        while (std::getline(ls, tok, ',')) {
          TrunkLayer t;
          if (a.kind == ModelKind::spherical) {
            auto x = tok.find('x');
            if (x == std::string::npos) throw ValidationError("architecture: spherical layer needs BxC, got '" + tok + "'");
            t.bandwidth = std::stoi(tok.substr(0, x));
            t.channels = std::stoi(tok.substr(x + 1));
          } else {
            t.channels = std::stoi(tok);
          }
          a.layers.push_back(t);
        }
      }
    } catch (const std::logic_error&) {
      throw ValidationError("architecture: non-numeric field in '" + text + "'");
    }
    a.validate();
    return a;
  }

  void validate() const {
    if (classes < 2) throw ValidationError("architecture: need at least two classes");
    if (kind == ModelKind::linear) {
      if (features < 1) throw ValidationError("architecture: features must be positive");
      return;
    }
    if (input_bandwidth < 1 || layers.empty()) throw ValidationError("architecture: empty trunk");
    int b = input_bandwidth;
    for (const auto& l : layers) {
      if (l.channels < 1) throw ValidationError("architecture: channels must be positive");
      if (kind == ModelKind::spherical) {
        if (l.bandwidth < 1 || l.bandwidth > b) throw ValidationError("architecture: bandwidth must not increase");
        b = l.bandwidth;
      }
    }
  }
};

// Scale presets. Planar trunks double the spherical channel counts.
struct Preset {
  Architecture spherical, planar;
};

inline Architecture spherical_architecture(int input_bandwidth, std::vector<TrunkLayer> layers) {
  Architecture a;
  a.kind = ModelKind::spherical;
  a.input_bandwidth = input_bandwidth;
  a.layers = std::move(layers);
  a.validate();
  return a;
}

inline Architecture planar_architecture(int input_bandwidth, const std::vector<int>& channels) {
  Architecture a;
  a.kind = ModelKind::planar;
  a.input_bandwidth = input_bandwidth;
  for (int c : channels) a.layers.push_back({0, c});
  a.validate();
  return a;
}

inline Architecture linear_architecture(int features) {
  Architecture a;
  a.kind = ModelKind::linear;
  a.features = features;
  return a;
}

inline Preset paper_preset() {
  return {spherical_architecture(64, {{32, 32}, {16, 64}, {8, 128}}), planar_architecture(64, {64, 128, 256})};
}

inline Preset desk_preset() {
  return {spherical_architecture(16, {{8, 8}, {4, 16}, {2, 32}}), planar_architecture(16, {16, 32, 64})};
}

// Smallest trunk that still exercises every layer type; for gradient checks.
inline Preset tiny_preset() {
  return {spherical_architecture(4, {{4, 2}, {2, 2}, {2, 2}}), planar_architecture(4, {2, 2, 2})};
}

inline Preset preset_by_name(const std::string& name) {
  if (name == "paper") return paper_preset();
  if (name == "desk") return desk_preset();
  if (name == "tiny") return tiny_preset();
  throw ValidationError("unknown preset '" + name + "'");
}

template <class T>
struct Model {
  Architecture arch;
  std::vector<Tensor<T>> tensors;
  bool training = true;

  Tensor<T>& get(const std::string& name) {
    for (auto& t : tensors)
      if (t.name == name) return t;
    throw InternalError("model: no tensor named " + name);
  }
  const Tensor<T>& get(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return t;
    throw InternalError("model: no tensor named " + name);
  }
  bool has(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return true;
    return false;
  }

  void zero_grad() {
    for (auto& t : tensors)
      if (t.trainable) t.zero_grad();
  }

  template <class U>
  Model<U> cast() const {
    Model<U> m;
    m.arch = arch;
    m.training = training;
    for (const auto& t : tensors) {
      Tensor<U> u;
      u.name = t.name;
      u.shape = t.shape;
      u.trainable = t.trainable;
      u.values.assign(t.values.begin(), t.values.end());
      m.tensors.push_back(std::move(u));
    }
    return m;
  }
};

inline bool is_buffer_name(const std::string& name) { return name.find(".running_") != std::string::npos; }

namespace detail {

template <class T>
void add_tensor(Model<T>& m, std::string name, Shape shape, T fill = T(0)) {
  Tensor<T> t;
  t.name = std::move(name);
  t.trainable = !is_buffer_name(t.name);
  t.values.assign(shape_size(shape), fill);
  t.shape = std::move(shape);
  m.tensors.push_back(std::move(t));
}

template <class T>
void add_batch_norm(Model<T>& m, int index, int channels) {
  const std::string p = "bn" + std::to_string(index);
  const std::size_t c = static_cast<std::size_t>(channels);
  add_tensor<T>(m, p + ".gamma", {c}, T(1));
  add_tensor<T>(m, p + ".beta", {c});
  add_tensor<T>(m, p + ".running_mean", {c});
  add_tensor<T>(m, p + ".running_var", {c}, T(1));
}

template <class T>
void init_fc(Model<T>& m, std::mt19937_64& rng) {
  auto& w = m.get("fc.weight");
  std::normal_distribution<double> g(0.0, std::sqrt(2.0 / static_cast<double>(w.shape[1])));
  for (auto& v : w.values) v = static_cast<T>(g(rng));
}

}  // namespace detail

// Allocates every tensor with zero kernels (BN gamma 1, running var 1).
template <class T>
Model<T> allocate_model(const Architecture& arch) {
  arch.validate();
  Model<T> m;
  m.arch = arch;
  int c = 1;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const auto& l = arch.layers[i];
    const std::string idx = std::to_string(i);
    const std::size_t co = static_cast<std::size_t>(l.channels), ci = static_cast<std::size_t>(c);
    if (arch.kind == ModelKind::spherical) {
      if (i == 0) {
        detail::add_tensor<T>(m, "s2conv0.kernel", {co, ci, static_cast<std::size_t>(l.bandwidth) * l.bandwidth, 2});
        detail::add_tensor<T>(m, "s2conv0.bias", {co});
      } else {
        detail::add_tensor<T>(m, "so3conv" + idx + ".kernel", {co, ci, so3_spectrum_size(l.bandwidth), 2});
        detail::add_tensor<T>(m, "so3conv" + idx + ".bias", {co});
      }
    } else if (arch.kind == ModelKind::planar) {
      detail::add_tensor<T>(m, "conv" + idx + ".weight", {co, ci, 3, 3});
      detail::add_tensor<T>(m, "conv" + idx + ".bias", {co});
    }
    detail::add_batch_norm(m, static_cast<int>(i), l.channels);
    c = l.channels;
  }
  detail::add_tensor<T>(m, "fc.weight", {static_cast<std::size_t>(arch.classes), static_cast<std::size_t>(arch.head_inputs())});
  detail::add_tensor<T>(m, "fc.bias", {static_cast<std::size_t>(arch.classes)});
  return m;
}

template <class T>
Model<T> build_spherical_model(const Architecture& arch, std::uint64_t seed) {
  if (arch.kind != ModelKind::spherical) throw std::invalid_argument("build_spherical_model: architecture is not spherical");
  Model<T> m = allocate_model<T>(arch);
  std::mt19937_64 rng(derive_seed(seed, 0x5ca1ab1e));
  int b = arch.input_bandwidth, c = 1;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const auto& l = arch.layers[i];
    std::vector<cplx> k;
    if (i == 0) {
      S2ConvLayer layer(c, l.channels, b, l.bandwidth);
      init_s2_kernel(layer, rng);
      k = layer.kernel;
    } else {
      SO3ConvLayer layer(c, l.channels, b, l.bandwidth);
      init_so3_kernel(layer, rng);
      k = layer.kernel;
    }
    auto& t = m.get((i == 0 ? "s2conv" : "so3conv") + std::to_string(i) + ".kernel");
    for (std::size_t e = 0; e < k.size(); ++e) {
      t.values[2 * e] = static_cast<T>(k[e].real());
      t.values[2 * e + 1] = static_cast<T>(k[e].imag());
    }
    b = l.bandwidth;
    c = l.channels;
  }
  detail::init_fc(m, rng);
  return m;
}

template <class T>
Model<T> build_spherical_model(std::uint64_t seed, const std::string& preset = "paper") {
  return build_spherical_model<T>(preset_by_name(preset).spherical, seed);
}

template <class T>
Model<T> build_planar_baseline(const Architecture& arch, std::uint64_t seed) {
  if (arch.kind != ModelKind::planar) throw std::invalid_argument("build_planar_baseline: architecture is not planar");
  Model<T> m = allocate_model<T>(arch);
  std::mt19937_64 rng(derive_seed(seed, 0x9a1a4));
  int c = 1;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    auto& w = m.get("conv" + std::to_string(i) + ".weight");
    std::normal_distribution<double> g(0.0, std::sqrt(2.0 / (9.0 * c)));
    for (auto& v : w.values) v = static_cast<T>(g(rng));
    c = arch.layers[i].channels;
  }
  detail::init_fc(m, rng);
  return m;
}

template <class T>
Model<T> build_planar_baseline(std::uint64_t seed, const std::string& preset = "paper") {
  return build_planar_baseline<T>(preset_by_name(preset).planar, seed);
}

template <class T>
Model<T> build_linear_model(int features, std::uint64_t seed) {
  Model<T> m = allocate_model<T>(linear_architecture(features));
  std::mt19937_64 rng(derive_seed(seed, 0x11a7));
  detail::init_fc(m, rng);
  return m;
}

template <class T>
Model<T> build_model(const Architecture& arch, std::uint64_t seed) {
  switch (arch.kind) {
    case ModelKind::spherical: return build_spherical_model<T>(arch, seed);
    case ModelKind::planar: return build_planar_baseline<T>(arch, seed);
    case ModelKind::linear: return build_linear_model<T>(arch.features, seed);
  }
  throw InternalError("build_model: unreachable");
}

// Scalar trainable parameters; a complex coefficient counts as two.
template <class T>
std::size_t count_parameters(const Model<T>& m) {
  std::size_t n = 0;
  for (const auto& t : m.tensors)
    if (t.trainable) n += t.size();
  return n;
}

// Checkpoint: "SCNN", u32 version, u32 length + architecture text, u32 tensor
// count, then per tensor u32 length + name, u32 rank, rank x u64 dims and f64
// values. Little-endian throughout.
inline constexpr std::uint32_t checkpoint_version = 1;

namespace detail {

template <class V>
void put(std::string& out, V v) {
  char b[sizeof(V)];
  std::memcpy(b, &v, sizeof(V));
  out.append(b, sizeof(V));
}

inline void put_string(std::string& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

class Reader {
public:
  explicit Reader(std::string data) : data_(std::move(data)) {}

  template <class V>
  V get(const char* what) {
    if (pos_ + sizeof(V) > data_.size()) throw ParseError(std::string("truncated input reading ") + what, pos_);
    V v;
    std::memcpy(&v, data_.data() + pos_, sizeof(V));
    pos_ += sizeof(V);
    return v;
  }

  std::string bytes(std::size_t n, const char* what) {
    if (n > data_.size() - pos_) throw ParseError(std::string("truncated input reading ") + what, pos_);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::string get_string(const char* what) { return bytes(get<std::uint32_t>(what), what); }

  void expect_magic(const std::string& magic) {
    std::size_t at = pos_;
    if (bytes(magic.size(), "magic") != magic) throw ParseError("bad magic, expected " + magic, at);
  }

  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == data_.size(); }

private:
  std::string data_;
  std::size_t pos_ = 0;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void write_file(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw ValidationError("write failed for " + path);
}

}  // namespace detail

template <class T>
std::string serialize_model(const Model<T>& m) {
  std::string out = "SCNN";
  detail::put<std::uint32_t>(out, checkpoint_version);
  detail::put_string(out, m.arch.to_text());
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(m.tensors.size()));
  for (const auto& t : m.tensors) {
    detail::put_string(out, t.name);
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) detail::put<std::uint64_t>(out, d);
    for (T v : t.values) detail::put<double>(out, static_cast<double>(v));
  }
  return out;
}

template <class T>
Model<T> deserialize_model(const std::string& bytes) {
  detail::Reader r(bytes);
  r.expect_magic("SCNN");
  std::size_t at = r.pos();
  if (auto v = r.get<std::uint32_t>("version"); v != checkpoint_version)
    throw ParseError("unsupported checkpoint version " + std::to_string(v), at);
  Model<T> m = allocate_model<T>(Architecture::parse(r.get_string("architecture")));
  at = r.pos();
  const auto count = r.get<std::uint32_t>("tensor count");
  if (count != m.tensors.size()) throw ParseError("tensor count does not match architecture", at);
  for (std::uint32_t i = 0; i < count; ++i) {
    at = r.pos();
    const std::string name = r.get_string("tensor name");
    if (!m.has(name)) throw ParseError("unexpected tensor " + name, at);
    auto& t = m.get(name);
    at = r.pos();
    Shape shape(r.get<std::uint32_t>("rank"));
    for (auto& d : shape) d = r.get<std::uint64_t>("dimension");
    if (shape != t.shape) throw ParseError("tensor " + name + " has shape " + shape_string(shape) + ", expected " + shape_string(t.shape), at);
    for (auto& v : t.values) v = static_cast<T>(r.get<double>("tensor values"));
  }
  if (!r.done()) throw ParseError("trailing bytes after checkpoint", r.pos());
  m.training = false;
  return m;
}

template <class T>
void save_model(const Model<T>& m, const std::string& path) {
  detail::write_file(path, serialize_model(m));
}

template <class T>
Model<T> load_model(const std::string& path) {
  return deserialize_model<T>(detail::read_file(path));
}

}  // namespace scnn
