#include "dan/data_io.hpp"

#include "dan/errors.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <string>

static_assert(std::endian::native == std::endian::little,
              "containers are little-endian; big-endian hosts are unsupported");

namespace dan::io {

// ---------------------------------------------------------------------------
// CRC-32 (IEEE 802.3 / zlib polynomial), table-driven, chainable.
// ---------------------------------------------------------------------------

namespace {

const std::array<std::uint32_t, 256>& crc_table() {
    static const std::array<std::uint32_t, 256> table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    return table;
}

}  // namespace

std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint32_t c = seed ^ 0xffffffffu;
    const auto& t = crc_table();
    for (std::size_t i = 0; i < len; ++i) c = t[(c ^ p[i]) & 0xffu] ^ (c >> 8);
    return c ^ 0xffffffffu;
}

// ---------------------------------------------------------------------------
// Streaming container helpers
// ---------------------------------------------------------------------------

namespace {

std::size_t file_size_of(std::ifstream& in, const std::string& path) {
    in.seekg(0, std::ios::end);
    const auto end = in.tellg();
    if (end < 0) throw TruncatedFile(path + ": cannot stat size");
    in.seekg(0, std::ios::beg);
    return static_cast<std::size_t>(end);
}

class CrcWriter {
public:
    CrcWriter(const std::string& path) : path_(path), out_(path, std::ios::binary) {
        if (!out_) throw IoError(path + ": cannot open for writing");
    }

    void bytes(const void* p, std::size_t n) {
        out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
        crc_ = crc32(p, n, crc_);
    }

    void u8(std::uint8_t v) { bytes(&v, 1); }

    void u32(std::uint32_t v) {
        const std::uint8_t b[4] = {static_cast<std::uint8_t>(v),
                                   static_cast<std::uint8_t>(v >> 8),
                                   static_cast<std::uint8_t>(v >> 16),
                                   static_cast<std::uint8_t>(v >> 24)};
        bytes(b, 4);
    }

    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }

    void f64(double v) { bytes(&v, 8); }

    void f64_array(const double* p, std::size_t n) { bytes(p, n * 8); }

    void finish() {
        const std::uint32_t c = crc_;
        const std::uint8_t b[4] = {static_cast<std::uint8_t>(c),
                                   static_cast<std::uint8_t>(c >> 8),
                                   static_cast<std::uint8_t>(c >> 16),
                                   static_cast<std::uint8_t>(c >> 24)};
        out_.write(reinterpret_cast<const char*>(b), 4);
        out_.flush();
        if (!out_) throw IoError(path_ + ": write failed");
    }

private:
    std::string path_;
    std::ofstream out_;
    std::uint32_t crc_ = 0;
};

class CrcReader {
public:
    CrcReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw TruncatedFile(path + ": cannot open");
        total_ = file_size_of(in_, path);
        if (total_ < 4) throw TruncatedFile(path + ": shorter than its checksum");
    }

    /// Payload bytes still available before the checksum trailer.
    std::size_t remaining() const { return total_ - 4 - consumed_; }

    void bytes(void* p, std::size_t n) {
        if (n > remaining())
            throw TruncatedFile(path_ + ": need " + std::to_string(n) + " bytes, " +
                                std::to_string(remaining()) + " available");
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (!in_) throw TruncatedFile(path_ + ": read failed");
        crc_ = crc32(p, n, crc_);
        consumed_ += n;
    }

    std::uint8_t u8() {
        std::uint8_t v;
        bytes(&v, 1);
        return v;
    }

    std::uint32_t u32() {
        std::uint8_t b[4];
        bytes(b, 4);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) |
               (static_cast<std::uint32_t>(b[3]) << 24);
    }

    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }

    double f64() {
        double v;
        bytes(&v, 8);
        return v;
    }

    void f64_array(double* p, std::size_t n) { bytes(p, n * 8); }

    void expect_magic(const char (&magic)[5]) {
        char m[4];
        bytes(m, 4);
        if (std::memcmp(m, magic, 4) != 0)
            throw BadMagic(path_ + ": bad magic, expected " + magic);
    }

    /// Consumes the checksum trailer; everything must be exactly used up.
    void finish() {
        if (remaining() != 0)
            throw TruncatedFile(path_ + ": " + std::to_string(remaining()) +
                                " unexpected trailing payload bytes");
        std::uint8_t b[4];
        in_.read(reinterpret_cast<char*>(b), 4);
        if (!in_) throw TruncatedFile(path_ + ": checksum trailer unreadable");
        const std::uint32_t stored = static_cast<std::uint32_t>(b[0]) |
                                     (static_cast<std::uint32_t>(b[1]) << 8) |
                                     (static_cast<std::uint32_t>(b[2]) << 16) |
                                     (static_cast<std::uint32_t>(b[3]) << 24);
        if (stored != crc_)
            throw ChecksumMismatch(path_ + ": CRC-32 mismatch");
    }

private:
    std::string path_;
    std::ifstream in_;
    std::size_t total_ = 0;
    std::size_t consumed_ = 0;
    std::uint32_t crc_ = 0;
};

std::uint32_t checked_u32(std::size_t v, const char* what) {
    if (v > 0xffffffffull)
        throw IoError(std::string(what) + " exceeds the u32 container field");
    return static_cast<std::uint32_t>(v);
}

}  // namespace

// ---------------------------------------------------------------------------
// MNIST IDX
// ---------------------------------------------------------------------------

namespace {

std::uint32_t read_be_u32(std::ifstream& in, const std::string& path) {
    std::uint8_t b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw TruncatedFile(path + ": header unreadable");
    return (static_cast<std::uint32_t>(b[0]) << 24) |
           (static_cast<std::uint32_t>(b[1]) << 16) |
           (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

}  // namespace

std::vector<int> load_idx_labels(const std::string& labels_path) {
    std::ifstream labs(labels_path, std::ios::binary);
    if (!labs) throw TruncatedFile(labels_path + ": cannot open");
    const std::size_t lab_size = file_size_of(labs, labels_path);
    if (lab_size < 8) throw TruncatedFile(labels_path + ": shorter than IDX header");
    if (read_be_u32(labs, labels_path) != 0x00000801u)
        throw BadMagic(labels_path + ": not an IDX label file");
    const std::uint32_t n = read_be_u32(labs, labels_path);
    if (lab_size != 8 + static_cast<std::size_t>(n))
        throw TruncatedFile(labels_path + ": size disagrees with declared count");
    std::vector<std::uint8_t> buf(n);
    labs.read(reinterpret_cast<char*>(buf.data()),
              static_cast<std::streamsize>(buf.size()));
    if (!labs) throw TruncatedFile(labels_path + ": label data unreadable");
    return std::vector<int>(buf.begin(), buf.end());
}

void save_idx_labels(const std::string& labels_path, const std::vector<int>& labels) {
    std::ofstream out(labels_path, std::ios::binary);
    if (!out) throw IoError(labels_path + ": cannot open for writing");
    auto be_u32 = [&](std::uint32_t v) {
        const std::uint8_t b[4] = {static_cast<std::uint8_t>(v >> 24),
                                   static_cast<std::uint8_t>(v >> 16),
                                   static_cast<std::uint8_t>(v >> 8),
                                   static_cast<std::uint8_t>(v)};
        out.write(reinterpret_cast<const char*>(b), 4);
    };
    be_u32(0x00000801u);
    be_u32(checked_u32(labels.size(), "label count"));
    for (int l : labels) {
        if (l < 0 || l > 255)
            throw ClassIndexOutOfRange("save_idx_labels: label " + std::to_string(l) +
                                       " does not fit the byte format");
        const char b = static_cast<char>(l);
        out.write(&b, 1);
    }
    out.flush();
    if (!out) throw IoError(labels_path + ": write failed");
}

ImageDataset load_mnist_idx(const std::string& images_path,
                            const std::string& labels_path) {
    // Images: magic 0x00000803, then n, rows, cols, then raw bytes.
    std::ifstream imgs(images_path, std::ios::binary);
    if (!imgs) throw TruncatedFile(images_path + ": cannot open");
    const std::size_t img_size = file_size_of(imgs, images_path);
    if (img_size < 16) throw TruncatedFile(images_path + ": shorter than IDX header");
    if (read_be_u32(imgs, images_path) != 0x00000803u)
        throw BadMagic(images_path + ": not an IDX image file");
    const std::uint32_t n = read_be_u32(imgs, images_path);
    const std::uint32_t rows = read_be_u32(imgs, images_path);
    const std::uint32_t cols = read_be_u32(imgs, images_path);
    const std::size_t want =
        16 + static_cast<std::size_t>(n) * rows * cols;
    if (img_size != want)
        throw TruncatedFile(images_path + ": declared " + std::to_string(want) +
                            " bytes, file has " + std::to_string(img_size));

    ImageDataset ds;
    ds.labels = load_idx_labels(labels_path);
    if (n != ds.labels.size())
        throw CountMismatch("IDX pair: " + std::to_string(n) + " images vs " +
                            std::to_string(ds.labels.size()) + " labels");

    ds.name = "mnist";
    ds.images.reserve(n);
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(rows) * cols);
    for (std::uint32_t i = 0; i < n; ++i) {
        imgs.read(reinterpret_cast<char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size()));
        if (!imgs) throw TruncatedFile(images_path + ": pixel data unreadable");
        Image im(rows, cols, 1);
        for (std::size_t p = 0; p < buf.size(); ++p)
            im.pix[p] = static_cast<double>(buf[p]) / 255.0;
        ds.images.push_back(std::move(im));
    }
    return ds;
}

// ---------------------------------------------------------------------------
// CIFAR-10 binary
// ---------------------------------------------------------------------------

ImageDataset load_cifar10(const std::vector<std::string>& batch_paths) {
    constexpr std::size_t kRecord = 3073;  // label byte + 3 * 1024 pixels
    constexpr std::size_t kSide = 32;
    constexpr std::size_t kPlane = kSide * kSide;

    ImageDataset ds;
    ds.name = "cifar10";
    for (const std::string& path : batch_paths) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw TruncatedFile(path + ": cannot open");
        const std::size_t size = file_size_of(in, path);
        if (size == 0) throw TruncatedFile(path + ": empty file");
        if (size % kRecord != 0)
            throw BadRecordSize(path + ": size " + std::to_string(size) +
                                " is not a multiple of " + std::to_string(kRecord));
        const std::size_t count = size / kRecord;
        std::vector<std::uint8_t> rec(kRecord);
        for (std::size_t r = 0; r < count; ++r) {
            in.read(reinterpret_cast<char*>(rec.data()), kRecord);
            if (!in) throw TruncatedFile(path + ": record unreadable");
            if (rec[0] > 9)
                throw BadRecordSize(path + ": label byte " + std::to_string(rec[0]) +
                                    " out of range");
            ds.labels.push_back(rec[0]);
            Image im(kSide, kSide, 3);
            for (std::size_t c = 0; c < 3; ++c)
                for (std::size_t p = 0; p < kPlane; ++p)
                    im.pix[p * 3 + c] =
                        static_cast<double>(rec[1 + c * kPlane + p]) / 255.0;
            ds.images.push_back(std::move(im));
        }
    }
    return ds;
}

// ---------------------------------------------------------------------------
// SHFB filter banks
// ---------------------------------------------------------------------------

void save_filter_bank(const std::string& path, const sh::FilterBank& bank) {
    bank.weights.check_finite("save_filter_bank");
    CrcWriter w(path);
    w.bytes("SHFB", 4);
    w.u32(1);
    w.u32(checked_u32(bank.filter_count(), "filter count"));
    w.u32(checked_u32(bank.patch_h, "patch_h"));
    w.u32(checked_u32(bank.patch_w, "patch_w"));
    w.u32(checked_u32(bank.channels, "channels"));
    w.f64_array(bank.weights.data(), bank.weights.size());
    w.finish();
}

sh::FilterBank load_filter_bank(const std::string& path) {
    CrcReader r(path);
    r.expect_magic("SHFB");
    const std::uint32_t version = r.u32();
    if (version != 1)
        throw VersionUnsupported(path + ": SHFB version " + std::to_string(version));
    const std::uint32_t l = r.u32();
    const std::uint32_t ph = r.u32();
    const std::uint32_t pw = r.u32();
    const std::uint32_t ch = r.u32();
    const std::size_t dim = static_cast<std::size_t>(ph) * pw * ch;
    if (l == 0 || dim == 0) throw TruncatedFile(path + ": empty filter bank");
    if (r.remaining() != static_cast<std::size_t>(l) * dim * 8)
        throw TruncatedFile(path + ": payload size disagrees with header");

    sh::FilterBank bank;
    bank.patch_h = ph;
    bank.patch_w = pw;
    bank.channels = ch;
    bank.origin = sh::FilterBank::Origin::loaded;
    bank.weights = Matrix(l, dim);
    r.f64_array(bank.weights.data(), bank.weights.size());
    r.finish();
    bank.weights.check_finite("load_filter_bank");
    return bank;
}

// ---------------------------------------------------------------------------
// SHFM feature caches
// ---------------------------------------------------------------------------

void save_features(const std::string& path, const Matrix& x) {
    CrcWriter w(path);
    w.bytes("SHFM", 4);
    w.u32(1);
    w.u32(checked_u32(x.rows(), "row count"));
    w.u32(checked_u32(x.cols(), "column count"));
    w.f64_array(x.data(), x.size());
    w.finish();
}

Matrix load_features(const std::string& path) {
    CrcReader r(path);
    r.expect_magic("SHFM");
    const std::uint32_t version = r.u32();
    if (version != 1)
        throw VersionUnsupported(path + ": SHFM version " + std::to_string(version));
    const std::uint32_t n = r.u32();
    const std::uint32_t d = r.u32();
    if (n == 0 || d == 0) throw TruncatedFile(path + ": empty feature matrix");
    if (r.remaining() != static_cast<std::size_t>(n) * d * 8)
        throw TruncatedFile(path + ": payload size disagrees with header");
    Matrix x(n, d);
    r.f64_array(x.data(), x.size());
    r.finish();
    return x;
}

// ---------------------------------------------------------------------------
// DANM models
// ---------------------------------------------------------------------------

void save_model(const std::string& path, const DanModel& model) {
    model.check_shape_chain();
    CrcWriter w(path);
    w.bytes("DANM", 4);
    w.u32(1);
    w.u32(checked_u32(model.input_dim, "input dim"));
    w.u32(checked_u32(model.classes, "class count"));
    w.u32(checked_u32(model.hyper.layers, "layer count"));
    w.u8(model.hyper.relu_enabled ? 1 : 0);
    w.u8(model.hyper.ft_enabled ? 1 : 0);
    w.u8(model.head.kind == HeadKind::linear_svm ? 1 : 0);
    w.u8(model.head.svm_on_pnorm ? 1 : 0);
    w.f64(model.hyper.beta);
    w.f64(model.hyper.lambda_ft);
    w.f64_array(model.hyper.lambda.data(), model.hyper.lambda.size());
    w.f64(model.head.svm_c_penalty);
    for (int id : model.class_ids) w.i32(id);

    for (const Matrix& wl : model.layers) {
        w.u32(checked_u32(wl.rows(), "layer rows"));
        w.u32(checked_u32(wl.cols(), "layer cols"));
        w.f64_array(wl.data(), wl.size());
    }

    w.u8(model.has_w_ft ? 1 : 0);
    if (model.has_w_ft) {
        w.u32(checked_u32(model.w_ft.rows(), "ft rows"));
        w.u32(checked_u32(model.w_ft.cols(), "ft cols"));
        w.f64_array(model.w_ft.data(), model.w_ft.size());
    }

    w.u8(model.has_svm ? 1 : 0);
    if (model.has_svm) {
        w.u32(checked_u32(model.svm.weights.rows(), "svm rows"));
        w.u32(checked_u32(model.svm.weights.cols(), "svm cols"));
        w.f64_array(model.svm.weights.data(), model.svm.weights.size());
        w.f64_array(model.svm.biases.data(), model.svm.biases.size());
        w.f64(model.svm.c_penalty);
        w.u8(model.svm.converged ? 1 : 0);
    }
    w.finish();
}

namespace {

Matrix read_matrix(CrcReader& r, const std::string& path) {
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    const std::size_t need = static_cast<std::size_t>(rows) * cols * 8;
    if (rows == 0 || cols == 0 || need > r.remaining())
        throw TruncatedFile(path + ": matrix block exceeds remaining payload");
    Matrix m(rows, cols);
    r.f64_array(m.data(), m.size());
    return m;
}

}  // namespace

DanModel load_model(const std::string& path) {
    CrcReader r(path);
    r.expect_magic("DANM");
    const std::uint32_t version = r.u32();
    if (version != 1)
        throw VersionUnsupported(path + ": DANM version " + std::to_string(version));

    DanModel m;
    m.input_dim = r.u32();
    m.classes = r.u32();
    m.hyper.layers = r.u32();
    if (m.classes == 0 || m.hyper.layers == 0)
        throw TruncatedFile(path + ": empty model header");
    m.hyper.relu_enabled = r.u8() != 0;
    m.hyper.ft_enabled = r.u8() != 0;
    m.head.kind = r.u8() != 0 ? HeadKind::linear_svm : HeadKind::ridge_ft;
    m.head.svm_on_pnorm = r.u8() != 0;
    m.hyper.beta = r.f64();
    m.hyper.lambda_ft = r.f64();
    if (m.hyper.layers * 8 > r.remaining())
        throw TruncatedFile(path + ": lambda block exceeds payload");
    m.hyper.lambda.resize(m.hyper.layers);
    r.f64_array(m.hyper.lambda.data(), m.hyper.lambda.size());
    m.head.svm_c_penalty = r.f64();
    m.class_ids.resize(m.classes);
    for (std::size_t c = 0; c < m.classes; ++c) m.class_ids[c] = r.i32();

    for (std::size_t l = 0; l < m.hyper.layers; ++l)
        m.layers.push_back(read_matrix(r, path));

    m.has_w_ft = r.u8() != 0;
    if (m.has_w_ft) m.w_ft = read_matrix(r, path);

    m.has_svm = r.u8() != 0;
    if (m.has_svm) {
        m.svm.weights = read_matrix(r, path);
        m.svm.biases.resize(m.svm.weights.rows());
        r.f64_array(m.svm.biases.data(), m.svm.biases.size());
        m.svm.c_penalty = r.f64();
        m.svm.converged = r.u8() != 0;
    }
    r.finish();
    m.check_shape_chain();
    return m;
}

}  // namespace dan::io
