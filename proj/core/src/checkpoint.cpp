#include "imm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace imm {

namespace {

constexpr char kMagic[4] = {'I', 'M', 'M', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kDtypeF64 = 1;

void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& buf, double v) { put_u64(buf, std::bit_cast<std::uint64_t>(v)); }

void put_tensor(std::string& buf, const std::string& name, const Mat& m) {
    put_u64(buf, name.size());
    buf.append(name);
    put_u32(buf, kDtypeF64);
    put_u32(buf, 2);
    put_u64(buf, static_cast<std::uint64_t>(m.rows()));
    put_u64(buf, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) put_f64(buf, m(r, c));
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw RuntimeFault("checkpoint: truncated file");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str(std::size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

template <class Fn>
void for_each_state_tensor(const TrainState& st, Fn&& fn) {
    for_each_tensor(st.net.p, [&](const std::string& name, const Mat& m) { fn("net." + name, m); });
    for_each_tensor(st.opt.m, [&](const std::string& name, const Mat& m) { fn("adam_m." + name, m); });
    for_each_tensor(st.opt.v, [&](const std::string& name, const Mat& m) { fn("adam_v." + name, m); });
    for_each_tensor(st.ema.shadow, [&](const std::string& name, const Mat& m) { fn("ema." + name, m); });
}

template <class Fn>
void for_each_state_tensor(TrainState& st, Fn&& fn) {
    for_each_tensor(st.net.p, [&](const std::string& name, Mat& m) { fn("net." + name, m); });
    for_each_tensor(st.opt.m, [&](const std::string& name, Mat& m) { fn("adam_m." + name, m); });
    for_each_tensor(st.opt.v, [&](const std::string& name, Mat& m) { fn("adam_v." + name, m); });
    for_each_tensor(st.ema.shadow, [&](const std::string& name, Mat& m) { fn("ema." + name, m); });
}

}  // namespace

void save_checkpoint(const std::string& path, const std::string& config_text, const TrainState& st,
                     std::uint64_t seed) {
    std::string buf;
    buf.append(kMagic, 4);
    put_u32(buf, kVersion);
    put_u64(buf, config_text.size());
    buf.append(config_text);
    put_u64(buf, static_cast<std::uint64_t>(st.opt.step));
    put_u64(buf, seed);

    std::uint64_t count = 0;
    for_each_state_tensor(st, [&](const std::string&, const Mat&) { ++count; });
    put_u64(buf, count);
    for_each_state_tensor(st, [&](const std::string& name, const Mat& m) { put_tensor(buf, name, m); });

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw RuntimeFault("checkpoint: cannot open for write: " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw RuntimeFault("checkpoint: write failed: " + path);
}

CheckpointFile load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RuntimeFault("checkpoint: cannot open: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    Reader r{buf};
    if (r.str(4) != std::string(kMagic, 4)) throw RuntimeFault("checkpoint: bad magic in " + path);
    CheckpointFile file;
    file.version = r.u32();
    if (file.version != kVersion)
        throw RuntimeFault("checkpoint: unsupported version " + std::to_string(file.version));
    file.config_text = r.str(r.u64());
    file.step = r.u64();
    file.seed = r.u64();
    std::uint64_t count = r.u64();
    file.tensors.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        std::string name = r.str(r.u64());
        std::uint32_t dtype = r.u32();
        if (dtype != kDtypeF64) throw RuntimeFault("checkpoint: unsupported dtype for " + name);
        std::uint32_t rank = r.u32();
        if (rank != 2) throw RuntimeFault("checkpoint: unsupported rank for " + name);
        std::uint64_t rows = r.u64();
        std::uint64_t cols = r.u64();
        Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (std::uint64_t rr = 0; rr < rows; ++rr)
            for (std::uint64_t cc = 0; cc < cols; ++cc)
                m(static_cast<Eigen::Index>(rr), static_cast<Eigen::Index>(cc)) = r.f64();
        file.tensors.emplace_back(std::move(name), std::move(m));
    }
    if (r.pos != buf.size()) throw RuntimeFault("checkpoint: trailing bytes in " + path);
    return file;
}

void apply_checkpoint(const CheckpointFile& file, TrainState& st) {
    std::size_t idx = 0;
    for_each_state_tensor(st, [&](const std::string& name, Mat& m) {
        if (idx >= file.tensors.size()) throw RuntimeFault("checkpoint: missing tensor " + name);
        const auto& [fname, fm] = file.tensors[idx];
        if (fname != name) throw RuntimeFault("checkpoint: tensor order mismatch: got " + fname + ", want " + name);
        if (fm.rows() != m.rows() || fm.cols() != m.cols())
            throw RuntimeFault("checkpoint: shape mismatch for " + name);
        m = fm;
        ++idx;
    });
    if (idx != file.tensors.size()) throw RuntimeFault("checkpoint: extra tensors in file");
    st.opt.step = static_cast<long>(file.step);
}

}  // namespace imm
