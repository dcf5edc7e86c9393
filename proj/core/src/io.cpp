#include "weightgen/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "weightgen/errors.hpp"

namespace weightgen {

namespace {

static_assert(std::endian::native == std::endian::little,
              "payloads are written little-endian; a byte-swapping reader is "
              "only needed on big-endian hosts");

void append_u32(std::string& out, uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

void append_f32(std::string& out, const float* data, size_t n) {
  out.append(reinterpret_cast<const char*>(data), n * sizeof(float));
}

struct Reader {
  const std::string& bytes;
  size_t pos = 0;
  std::string path;

  void need(size_t n, const char* what) {
    if (pos + n > bytes.size()) {
      throw FormatError(path + ": truncated " + what);
    }
  }
  uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<uint8_t>(bytes[pos++]);
  }
  uint32_t u32(const char* what) {
    need(4, what);
    uint32_t v;
    std::memcpy(&v, bytes.data() + pos, 4);
    pos += 4;
    return v;
  }
  void f32(float* dst, size_t n, const char* what) {
    need(n * sizeof(float), what);
    std::memcpy(dst, bytes.data() + pos, n * sizeof(float));
    pos += n * sizeof(float);
  }
  std::string str(size_t n, const char* what) {
    need(n, what);
    std::string s = bytes.substr(pos, n);
    pos += n;
    return s;
  }
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

void check_magic(Reader& r, const char* magic) {
  const std::string got = r.str(4, "magic");
  if (got != magic) {
    throw FormatError(r.path + ": bad magic '" + got + "', expected '" + magic + "'");
  }
}

}  // namespace

void atomic_write(const std::filesystem::path& path, const std::string& bytes) {
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw MissingArtifactError("cannot write " + tmp);
    out.write(bytes.data(), static_cast<long>(bytes.size()));
    if (!out) throw MissingArtifactError("short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

void write_wts(const std::filesystem::path& path, const WeightVector& v) {
  if (!v.layout) throw LayoutError("write_wts: vector has no layout");
  std::string out;
  out += "WZV1";
  out.push_back(0);  // little endian
  append_u32(out, static_cast<uint32_t>(v.layout->layers.size()));
  for (const auto& spec : v.layout->layers) {
    out.push_back(static_cast<char>(spec.kind));
    out.push_back(static_cast<char>(spec.weight_shape.size()));
    for (int d : spec.weight_shape) append_u32(out, static_cast<uint32_t>(d));
  }
  append_f32(out, v.values.data(), v.values.size());
  atomic_write(path, out);
}

WeightVector read_wts(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  Reader r{bytes, 0, path.string()};
  check_magic(r, "WZV1");
  const uint8_t endian = r.u8("endianness flag");
  if (endian != 0) throw FormatError(path.string() + ": unsupported endianness flag");
  const uint32_t layer_count = r.u32("layer count");
  std::vector<std::pair<LayerKind, std::vector<int>>> specs;
  for (uint32_t l = 0; l < layer_count; ++l) {
    const uint8_t kind = r.u8("layer kind");
    if (kind > 1) throw FormatError(path.string() + ": unknown layer kind");
    const uint8_t ndims = r.u8("layer ndims");
    std::vector<int> dims;
    for (uint8_t i = 0; i < ndims; ++i) dims.push_back(static_cast<int>(r.u32("layer dim")));
    specs.emplace_back(static_cast<LayerKind>(kind), std::move(dims));
  }
  auto layout = std::make_shared<LayerLayout>(make_layout(specs));
  WeightVector v;
  v.values.resize(static_cast<size_t>(layout->total));
  r.f32(v.values.data(), v.values.size(), "weight payload");
  if (r.pos != bytes.size()) throw FormatError(path.string() + ": trailing bytes after payload");
  v.layout = std::move(layout);
  return v;
}

void write_wze(const std::filesystem::path& path, const EmbeddingMatrix& m,
               const std::string& sidecar_json) {
  std::string out;
  out += "WZE1";
  append_u32(out, static_cast<uint32_t>(m.dim));
  append_u32(out, static_cast<uint32_t>(m.count()));
  append_f32(out, m.rows.data(), m.rows.size());
  atomic_write(path, out);
  if (!sidecar_json.empty()) {
    atomic_write(path.string() + ".json", sidecar_json);
  }
}

EmbeddingMatrix read_wze(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  Reader r{bytes, 0, path.string()};
  check_magic(r, "WZE1");
  EmbeddingMatrix m;
  m.dim = static_cast<int>(r.u32("embedding dim"));
  const uint32_t count = r.u32("embedding count");
  m.rows.resize(static_cast<size_t>(m.dim) * count);
  r.f32(m.rows.data(), m.rows.size(), "embedding payload");
  if (r.pos != bytes.size()) throw FormatError(path.string() + ": trailing bytes after payload");
  return m;
}

void BlobCheckpoint::add(const std::string& name, const Tensor& t) {
  add_raw(name, t.shape(), std::vector<float>(t.values().begin(), t.values().end()));
}

void BlobCheckpoint::add_raw(const std::string& name, std::vector<int> shape,
                             std::vector<float> values) {
  param_names.push_back(name);
  param_shapes.push_back(std::move(shape));
  param_values.push_back(std::move(values));
}

bool BlobCheckpoint::has(const std::string& name) const {
  for (const auto& n : param_names) {
    if (n == name) return true;
  }
  return false;
}

const std::vector<float>& BlobCheckpoint::get(const std::string& name) const {
  for (size_t i = 0; i < param_names.size(); ++i) {
    if (param_names[i] == name) return param_values[i];
  }
  throw FormatError("checkpoint has no parameter '" + name + "'");
}

const std::vector<int>& BlobCheckpoint::shape_of(const std::string& name) const {
  for (size_t i = 0; i < param_names.size(); ++i) {
    if (param_names[i] == name) return param_shapes[i];
  }
  throw FormatError("checkpoint has no parameter '" + name + "'");
}

void write_wza(const std::filesystem::path& path, const BlobCheckpoint& ckpt) {
  nlohmann::json header = ckpt.header_json.empty()
                              ? nlohmann::json::object()
                              : nlohmann::json::parse(ckpt.header_json);
  nlohmann::json params = nlohmann::json::array();
  for (size_t i = 0; i < ckpt.param_names.size(); ++i) {
    params.push_back({{"name", ckpt.param_names[i]}, {"shape", ckpt.param_shapes[i]}});
  }
  header["params"] = std::move(params);
  const std::string hstr = header.dump();
  std::string out;
  out += "WZA1";
  append_u32(out, static_cast<uint32_t>(hstr.size()));
  out += hstr;
  for (const auto& vals : ckpt.param_values) append_f32(out, vals.data(), vals.size());
  atomic_write(path, out);
}

BlobCheckpoint read_wza(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  Reader r{bytes, 0, path.string()};
  check_magic(r, "WZA1");
  const uint32_t hlen = r.u32("header length");
  const std::string hstr = r.str(hlen, "json header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(hstr);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": invalid JSON header: " + e.what());
  }
  BlobCheckpoint ckpt;
  ckpt.header_json = hstr;
  if (!header.contains("params") || !header["params"].is_array()) {
    throw FormatError(path.string() + ": header missing params manifest");
  }
  for (const auto& p : header["params"]) {
    const std::string name = p.at("name").get<std::string>();
    const std::vector<int> shape = p.at("shape").get<std::vector<int>>();
    int64_t n = 1;
    for (int d : shape) n *= d;
    std::vector<float> vals(static_cast<size_t>(n));
    r.f32(vals.data(), vals.size(), "parameter payload");
    ckpt.add_raw(name, shape, std::move(vals));
  }
  if (r.pos != bytes.size()) throw FormatError(path.string() + ": trailing bytes after payload");
  return ckpt;
}

}  // namespace weightgen
