#include "fewshot/embed_store.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "fewshot/error.hpp"

namespace fewshot {
namespace {

void check_labels(std::span<const std::uint32_t> labels, std::uint32_t num_classes) {
  if (num_classes == 0) throw Error(ErrorCode::EmptyClass, "set declares zero classes");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) {
      throw Error(ErrorCode::LabelOutOfRange, "row " + std::to_string(i) + " has label " +
                                                  std::to_string(labels[i]) + " but c=" +
                                                  std::to_string(num_classes));
    }
  }
}

std::vector<std::vector<std::uint32_t>> build_class_index(std::span<const std::uint32_t> labels,
                                                          std::uint32_t num_classes) {
  std::vector<std::vector<std::uint32_t>> index(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    index[labels[i]].push_back(static_cast<std::uint32_t>(i));
  }
  for (std::size_t c = 0; c < index.size(); ++c) {
    if (index[c].empty()) {
      throw Error(ErrorCode::EmptyClass, "class " + std::to_string(c) + " has no samples");
    }
  }
  return index;
}

void check_finite(const MatrixF& m, const char* what) {
  if (!m.allFinite()) throw Error(ErrorCode::NonFiniteValue, std::string(what) + " contains NaN/Inf");
}

class ByteWriter {
 public:
  explicit ByteWriter(std::size_t reserve) { out_.reserve(reserve); }

  void put_u8(std::uint8_t v) { out_.push_back(v); }
  void put_u32(std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) out_.push_back(static_cast<std::uint8_t>(v >> s));
  }
  void put_f32(float v) { put_u32(std::bit_cast<std::uint32_t>(v)); }
  void put_floats(const float* data, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) put_f32(data[i]);
  }

  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, std::size_t start) : bytes_(bytes), pos_(start) {}

  void need(std::size_t count) const {
    if (count > bytes_.size() - pos_) {
      throw Error(ErrorCode::TruncatedFile, "need " + std::to_string(count) + " bytes at offset " +
                                                std::to_string(pos_) + ", file has " +
                                                std::to_string(bytes_.size()));
    }
  }
  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int s = 0; s < 4; ++s) v |= static_cast<std::uint32_t>(bytes_[pos_ + s]) << (8 * s);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  void floats(float* dst, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) dst[i] = f32();
  }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

// Saturating so absurd headers report TruncatedFile instead of overflowing.
std::size_t saturate(unsigned __int128 bytes) {
  if (bytes > std::numeric_limits<std::size_t>::max()) return std::numeric_limits<std::size_t>::max();
  return static_cast<std::size_t>(bytes);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::IoFailure, "read failed for " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

std::uint32_t to_u32(std::size_t v, const char* what) {
  if (v > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorCode::IoFailure, std::string(what) + " does not fit in u32");
  }
  return static_cast<std::uint32_t>(v);
}

}  // namespace

// --- EmbeddingSet ---------------------------------------------------------

EmbeddingSet EmbeddingSet::create(MatrixF features, std::vector<std::uint32_t> labels,
                                  std::uint32_t num_classes) {
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw Error(ErrorCode::LengthMismatch, "feature rows and label count differ");
  }
  if (features.cols() == 0) throw Error(ErrorCode::ParseError, "feature dimension is zero");
  check_labels(labels, num_classes);
  check_finite(features, "features");
  EmbeddingSet set;
  set.class_index_ = build_class_index(labels, num_classes);
  set.features_ = std::move(features);
  set.labels_ = std::move(labels);
  return set;
}

Vector EmbeddingSet::row(std::size_t i) const {
  return features_.row(static_cast<Eigen::Index>(i)).cast<double>().transpose();
}

Matrix EmbeddingSet::gather(std::span<const std::uint32_t> rows) const {
  Matrix out(static_cast<Eigen::Index>(rows.size()), features_.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) = features_.row(rows[r]).cast<double>();
  }
  return out;
}

bool operator==(const EmbeddingSet& a, const EmbeddingSet& b) {
  return a.num_classes() == b.num_classes() && a.labels_ == b.labels_ &&
         a.features_.rows() == b.features_.rows() && a.features_.cols() == b.features_.cols() &&
         std::memcmp(a.features_.data(), b.features_.data(),
                     sizeof(float) * static_cast<std::size_t>(a.features_.size())) == 0;
}

// --- TokenEmbeddingSet ----------------------------------------------------

TokenEmbeddingSet TokenEmbeddingSet::create(MatrixF cls, MatrixF patches, MatrixF attention,
                                            std::vector<std::uint32_t> labels,
                                            std::uint32_t num_classes) {
  const auto n = static_cast<Eigen::Index>(labels.size());
  if (cls.rows() != n || patches.rows() != n || attention.rows() != n) {
    throw Error(ErrorCode::LengthMismatch, "token arrays disagree on sample count");
  }
  if (cls.cols() == 0) throw Error(ErrorCode::ParseError, "feature dimension is zero");
  if (patches.cols() != attention.cols() * cls.cols()) {
    throw Error(ErrorCode::LengthMismatch, "patch block is not p*d wide");
  }
  check_labels(labels, num_classes);
  check_finite(cls, "cls tokens");
  check_finite(patches, "patch tokens");
  check_finite(attention, "attention weights");
  for (Eigen::Index i = 0; i < n; ++i) {
    if ((attention.row(i).array() < 0.0f).any()) {
      throw Error(ErrorCode::NegativeAttention, "sample " + std::to_string(i));
    }
    if ((attention.row(i).array() == 0.0f).all()) {
      throw Error(ErrorCode::AllZeroAttention, "sample " + std::to_string(i));
    }
  }
  build_class_index(labels, num_classes);

  TokenEmbeddingSet set;
  set.cls_ = std::move(cls);
  set.patches_ = std::move(patches);
  set.attention_ = std::move(attention);
  set.labels_ = std::move(labels);
  set.num_classes_ = num_classes;
  return set;
}

Vector TokenEmbeddingSet::cls(std::size_t i) const {
  return cls_.row(static_cast<Eigen::Index>(i)).cast<double>().transpose();
}

Matrix TokenEmbeddingSet::patches(std::size_t i) const {
  const auto p = attention_.cols();
  const auto d = cls_.cols();
  Matrix out(p, d);
  const float* src = patches_.row(static_cast<Eigen::Index>(i)).data();
  for (Eigen::Index k = 0; k < p * d; ++k) out.data()[k] = src[k];
  return out;
}

Vector TokenEmbeddingSet::attn(std::size_t i) const {
  return attention_.row(static_cast<Eigen::Index>(i)).cast<double>().transpose();
}

bool operator==(const TokenEmbeddingSet& a, const TokenEmbeddingSet& b) {
  auto same = [](const MatrixF& x, const MatrixF& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() &&
           std::memcmp(x.data(), y.data(), sizeof(float) * static_cast<std::size_t>(x.size())) == 0;
  };
  return a.num_classes_ == b.num_classes_ && a.labels_ == b.labels_ && same(a.cls_, b.cls_) &&
         same(a.patches_, b.patches_) && same(a.attention_, b.attention_);
}

// --- FSE1 -----------------------------------------------------------------

std::vector<std::uint8_t> encode(const EmbeddingSet& set) {
  const std::size_t n = set.size();
  const std::size_t d = set.dim();
  ByteWriter w(kHeaderBytes + 4 * n * d + 4 * n);
  for (char ch : {'F', 'S', 'E', '1'}) w.put_u8(static_cast<std::uint8_t>(ch));
  w.put_u32(to_u32(n, "n"));
  w.put_u32(to_u32(d, "d"));
  w.put_u32(to_u32(set.num_classes(), "c"));
  w.put_u8(static_cast<std::uint8_t>(SetKind::Fused));
  w.put_floats(set.features().data(), n * d);
  for (auto label : set.labels()) w.put_u32(label);
  return w.take();
}

std::vector<std::uint8_t> encode(const TokenEmbeddingSet& set) {
  const std::size_t n = set.size();
  const std::size_t d = set.dim();
  const std::size_t p = set.num_patches();
  ByteWriter w(kHeaderBytes + 4 + 4 * n * (d + p * d + p) + 4 * n);
  for (char ch : {'F', 'S', 'E', '1'}) w.put_u8(static_cast<std::uint8_t>(ch));
  w.put_u32(to_u32(n, "n"));
  w.put_u32(to_u32(d, "d"));
  w.put_u32(to_u32(set.num_classes(), "c"));
  w.put_u8(static_cast<std::uint8_t>(SetKind::Tokens));
  w.put_u32(to_u32(p, "p"));
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    w.put_floats(set.cls_tokens().row(r).data(), d);
    w.put_floats(set.patch_tokens().row(r).data(), p * d);
    w.put_floats(set.attention().row(r).data(), p);
  }
  for (auto label : set.labels()) w.put_u32(label);
  return w.take();
}

LoadedSet decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw Error(ErrorCode::TruncatedFile, "file shorter than magic");
  if (bytes[0] != 'F' || bytes[1] != 'S' || bytes[2] != 'E') {
    throw Error(ErrorCode::BadMagic, "not an FSE file");
  }
  if (bytes[3] != '1') {
    throw Error(ErrorCode::VersionMismatch,
                std::string("format version '") + static_cast<char>(bytes[3]) + "', expected '1'");
  }
  ByteReader r(bytes, 4);
  const std::uint32_t n = r.u32();
  const std::uint32_t d = r.u32();
  const std::uint32_t c = r.u32();
  const std::uint8_t kind = r.u8();

  std::vector<std::uint32_t> labels;
  auto read_labels = [&] {
    labels.resize(n);
    for (auto& l : labels) l = r.u32();
    if (r.remaining() != 0) {
      throw Error(ErrorCode::TrailingData, std::to_string(r.remaining()) + " unexpected bytes");
    }
  };

  if (kind == static_cast<std::uint8_t>(SetKind::Fused)) {
    r.need(saturate(4 * (static_cast<unsigned __int128>(n) * d + n)));
    MatrixF features(n, d);
    r.floats(features.data(), static_cast<std::size_t>(n) * d);
    read_labels();
    return EmbeddingSet::create(std::move(features), std::move(labels), c);
  }
  if (kind == static_cast<std::uint8_t>(SetKind::Tokens)) {
    const std::uint32_t p = r.u32();
    const unsigned __int128 per_sample = 4 * (static_cast<unsigned __int128>(d) * (1 + p) + p);
    const unsigned __int128 payload = per_sample * n + 4ull * n;
    r.need(saturate(payload));
    MatrixF cls(n, d);
    MatrixF patches(n, static_cast<Eigen::Index>(p) * d);
    MatrixF attention(n, p);
    for (std::uint32_t i = 0; i < n; ++i) {
      r.floats(cls.row(i).data(), d);
      r.floats(patches.row(i).data(), static_cast<std::size_t>(p) * d);
      r.floats(attention.row(i).data(), p);
    }
    read_labels();
    return TokenEmbeddingSet::create(std::move(cls), std::move(patches), std::move(attention),
                                     std::move(labels), c);
  }
  throw Error(ErrorCode::InvalidKind, "kind byte " + std::to_string(kind));
}

LoadedSet load(const std::filesystem::path& path) { return decode(read_file(path)); }

void save(const EmbeddingSet& set, const std::filesystem::path& path) { write_file(path, encode(set)); }

void save(const TokenEmbeddingSet& set, const std::filesystem::path& path) {
  write_file(path, encode(set));
}

// --- CSV ------------------------------------------------------------------

EmbeddingSet parse_csv(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) lines.push_back(line);
    start = end + 1;
  }
  if (lines.empty()) throw Error(ErrorCode::ParseError, "empty CSV");

  auto split = [](std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t s = 0;
    while (true) {
      std::size_t comma = line.find(',', s);
      cells.push_back(line.substr(s, comma == std::string_view::npos ? line.npos : comma - s));
      if (comma == std::string_view::npos) break;
      s = comma + 1;
    }
    return cells;
  };

  const auto header = split(lines.front());
  if (header.size() < 2 || header[0] != "label") {
    throw Error(ErrorCode::ParseError, "header must be label,f0,...,f{d-1}");
  }
  for (std::size_t j = 1; j < header.size(); ++j) {
    if (header[j] != "f" + std::to_string(j - 1)) {
      throw Error(ErrorCode::ParseError, "unexpected header column '" + std::string(header[j]) + "'");
    }
  }
  const std::size_t d = header.size() - 1;
  const std::size_t n = lines.size() - 1;

  MatrixF features(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  std::vector<std::uint32_t> labels(n);
  std::uint32_t max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto cells = split(lines[i + 1]);
    if (cells.size() != d + 1) {
      throw Error(ErrorCode::RaggedRow, "line " + std::to_string(i + 2) + " has " +
                                            std::to_string(cells.size()) + " cells, expected " +
                                            std::to_string(d + 1));
    }
    auto [lp, lec] = std::from_chars(cells[0].data(), cells[0].data() + cells[0].size(), labels[i]);
    if (lec != std::errc() || lp != cells[0].data() + cells[0].size()) {
      throw Error(ErrorCode::ParseError, "bad label on line " + std::to_string(i + 2));
    }
    max_label = std::max(max_label, labels[i]);
    for (std::size_t j = 0; j < d; ++j) {
      const auto cell = cells[j + 1];
      double v = 0.0;
      auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || p != cell.data() + cell.size()) {
        throw Error(ErrorCode::ParseError, "bad value '" + std::string(cell) + "' on line " +
                                               std::to_string(i + 2));
      }
      features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = static_cast<float>(v);
    }
  }
  return EmbeddingSet::create(std::move(features), std::move(labels), n == 0 ? 0 : max_label + 1);
}

EmbeddingSet load_csv(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return parse_csv(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

}  // namespace fewshot
