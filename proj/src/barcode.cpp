#include "mbcal/barcode.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

namespace mbcal {

bool line_intersects_mask(const HomogLine& line, const Mask& mask) {
    if (mask.empty_foreground()) return false;
    const double nrm = line.v.head<2>().norm();
    if (nrm <= 1e-300) return false;  // line at infinity misses all pixels
    const double a = line.v.x() / nrm, b = line.v.y() / nrm, c = line.v.z() / nrm;

    // Quick reject: the incidence band misses the foreground bounding box.
    {
        const double v00 = a * mask.bboxX0 + b * mask.bboxY0 + c;
        const double v10 = a * mask.bboxX1 + b * mask.bboxY0 + c;
        const double v01 = a * mask.bboxX0 + b * mask.bboxY1 + c;
        const double v11 = a * mask.bboxX1 + b * mask.bboxY1 + c;
        const double lo = std::min({v00, v10, v01, v11});
        const double hi = std::max({v00, v10, v01, v11});
        if (lo > 0.5 || hi < -0.5) return false;
    }

    auto hit = [&](int x, int y) {
        return mask.at(x, y) && std::abs(a * x + b * y + c) <= 0.5;
    };

    if (std::abs(b) >= std::abs(a)) {
        // near-horizontal: a short y-interval per column
        for (int x = mask.bboxX0; x <= mask.bboxX1; ++x) {
            const double y1 = (-0.5 - a * x - c) / b;
            const double y2 = (0.5 - a * x - c) / b;
            const int yLo = std::max(mask.bboxY0, static_cast<int>(std::ceil(std::min(y1, y2))) - 1);
            const int yHi = std::min(mask.bboxY1, static_cast<int>(std::floor(std::max(y1, y2))) + 1);
            for (int y = yLo; y <= yHi; ++y)
                if (hit(x, y)) return true;
        }
    } else {
        for (int y = mask.bboxY0; y <= mask.bboxY1; ++y) {
            const double x1 = (-0.5 - b * y - c) / a;
            const double x2 = (0.5 - b * y - c) / a;
            const int xLo = std::max(mask.bboxX0, static_cast<int>(std::ceil(std::min(x1, x2))) - 1);
            const int xHi = std::min(mask.bboxX1, static_cast<int>(std::floor(std::max(x1, x2))) + 1);
            for (int x = xLo; x <= xHi; ++x)
                if (hit(x, y)) return true;
        }
    }
    return false;
}

Barcode barcode_from_bits(std::vector<uint8_t> bits) {
    Barcode b;
    b.bits = std::move(bits);
    if (b.bits.empty()) return b;
    size_t ones = 0;
    for (uint8_t v : b.bits) ones += v;
    const double n = static_cast<double>(b.bits.size());
    b.mean = static_cast<double>(ones) / n;
    b.stdev = std::sqrt(std::max(0.0, b.mean - b.mean * b.mean));
    return b;
}

Barcode motion_barcode(const HomogLine& line, const std::vector<Mask>& masks) {
    if (masks.empty()) throw DimensionMismatch("motion_barcode: no masks");
    std::vector<uint8_t> bits(masks.size());
    for (size_t t = 0; t < masks.size(); ++t) {
        if (masks[t].width != masks[0].width || masks[t].height != masks[0].height)
            throw DimensionMismatch("motion_barcode: mask dimensions differ");
        bits[t] = line_intersects_mask(line, masks[t]) ? 1 : 0;
    }
    return barcode_from_bits(std::move(bits));
}

CorrelationResult barcode_correlation(const Barcode& a, const Barcode& b) {
    if (a.size() != b.size())
        throw LengthMismatch("barcode_correlation: unequal lengths");
    if (a.degenerate() || b.degenerate()) return {0.0, true};
    const double n = static_cast<double>(a.size());
    double dot = 0.0;
    for (size_t i = 0; i < a.size(); ++i) dot += a.bits[i] && b.bits[i] ? 1.0 : 0.0;
    double r = (dot / n - a.mean * b.mean) / (a.stdev * b.stdev);
    return {std::clamp(r, -1.0, 1.0), false};
}

AffinityMatrix affinity_matrix(const std::vector<Barcode>& rows, const std::vector<Barcode>& cols) {
    const size_t n = rows.empty() ? (cols.empty() ? 0 : cols[0].size()) : rows[0].size();
    for (const auto& b : rows)
        if (b.size() != n) throw LengthMismatch("affinity_matrix: unequal lengths");
    for (const auto& b : cols)
        if (b.size() != n) throw LengthMismatch("affinity_matrix: unequal lengths");

    auto zmatrix = [&](const std::vector<Barcode>& set, std::vector<uint8_t>& flags) {
        Eigen::MatrixXd z(static_cast<Eigen::Index>(set.size()), static_cast<Eigen::Index>(n));
        flags.resize(set.size());
        for (Eigen::Index i = 0; i < z.rows(); ++i) {
            const Barcode& b = set[static_cast<size_t>(i)];
            flags[static_cast<size_t>(i)] = b.degenerate() ? 1 : 0;
            if (b.degenerate()) {
                z.row(i).setZero();
                continue;
            }
            const double scale = 1.0 / (b.stdev * std::sqrt(static_cast<double>(n)));
            for (Eigen::Index t = 0; t < z.cols(); ++t)
                z(i, t) = (b.bits[static_cast<size_t>(t)] - b.mean) * scale;
        }
        return z;
    };

    AffinityMatrix m;
    const Eigen::MatrixXd zr = zmatrix(rows, m.rowDegenerate);
    const Eigen::MatrixXd zc = zmatrix(cols, m.colDegenerate);
    m.values = zr * zc.transpose();
    m.values = m.values.cwiseMax(-1.0).cwiseMin(1.0);
    return m;
}

LineBank compute_line_bank(const std::vector<Mask>& masks, double angleStepDeg) {
    LineBank bank(masks.size());
    for (size_t f = 0; f < masks.size(); ++f) {
        FrameLines& fl = bank[f];
        if (masks[f].empty_foreground()) continue;
        fl.hull = convex_hull(masks[f]);
        if (fl.hull.degenerate()) continue;  // no tangents, still in barcodes
        fl.lines = tangent_lines(fl.hull, angleStepDeg);
        fl.barcodes.reserve(fl.lines.size());
        for (const auto& cl : fl.lines)
            fl.barcodes.push_back(motion_barcode(cl.line, masks));
    }
    return bank;
}

// --- cache serialization ---

namespace {

constexpr uint32_t kMagic = 0x4D424342;  // "MBCB"
constexpr uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw FormatError("load_line_bank: truncated stream");
    return v;
}

void put_bits(std::ostream& out, const std::vector<uint8_t>& bits) {
    put<uint32_t>(out, static_cast<uint32_t>(bits.size()));
    std::vector<uint8_t> packed((bits.size() + 7) / 8, 0);
    for (size_t i = 0; i < bits.size(); ++i)
        if (bits[i]) packed[i / 8] |= static_cast<uint8_t>(1u << (i % 8));
    out.write(reinterpret_cast<const char*>(packed.data()),
              static_cast<std::streamsize>(packed.size()));
}

std::vector<uint8_t> get_bits(std::istream& in) {
    const uint32_t n = get<uint32_t>(in);
    std::vector<uint8_t> packed((n + 7) / 8);
    in.read(reinterpret_cast<char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
    if (!in) throw FormatError("load_line_bank: truncated bit rows");
    std::vector<uint8_t> bits(n);
    for (uint32_t i = 0; i < n; ++i)
        bits[i] = (packed[i / 8] >> (i % 8)) & 1u;
    return bits;
}

}  // namespace

void save_line_bank(const LineBank& bank, double angleStepDeg, std::ostream& out) {
    put(out, kMagic);
    put(out, kVersion);
    put<uint32_t>(out, static_cast<uint32_t>(bank.size()));
    put(out, angleStepDeg);
    for (const auto& fl : bank) {
        put<uint32_t>(out, static_cast<uint32_t>(fl.hull.vertices.size()));
        for (const auto& v : fl.hull.vertices) {
            put(out, v.x());
            put(out, v.y());
        }
        put<uint32_t>(out, static_cast<uint32_t>(fl.lines.size()));
        for (size_t i = 0; i < fl.lines.size(); ++i) {
            const CandidateLine& cl = fl.lines[i];
            put(out, cl.line.v.x());
            put(out, cl.line.v.y());
            put(out, cl.line.v.z());
            put(out, cl.touch.pos.x());
            put(out, cl.touch.pos.y());
            put(out, cl.normalAngle);
            const Barcode& b = fl.barcodes[i];
            put_bits(out, b.bits);
            put(out, b.mean);
            put(out, b.stdev);
        }
    }
}

void save_line_bank_file(const LineBank& bank, double angleStepDeg, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("save_line_bank: cannot open " + path);
    save_line_bank(bank, angleStepDeg, out);
}

LineBank load_line_bank(std::istream& in, double* angleStepDeg) {
    if (get<uint32_t>(in) != kMagic) throw FormatError("load_line_bank: bad magic");
    if (get<uint32_t>(in) != kVersion) throw FormatError("load_line_bank: unsupported version");
    const uint32_t frames = get<uint32_t>(in);
    const double step = get<double>(in);
    if (angleStepDeg) *angleStepDeg = step;
    LineBank bank(frames);
    for (auto& fl : bank) {
        const uint32_t nv = get<uint32_t>(in);
        fl.hull.vertices.resize(nv);
        for (auto& v : fl.hull.vertices) {
            v.x() = get<double>(in);
            v.y() = get<double>(in);
        }
        const uint32_t nl = get<uint32_t>(in);
        fl.lines.resize(nl);
        fl.barcodes.resize(nl);
        for (uint32_t i = 0; i < nl; ++i) {
            CandidateLine& cl = fl.lines[i];
            const double a = get<double>(in), b = get<double>(in), c = get<double>(in);
            cl.line = HomogLine(a, b, c);
            cl.touch.pos.x() = get<double>(in);
            cl.touch.pos.y() = get<double>(in);
            cl.normalAngle = get<double>(in);
            Barcode& bc = fl.barcodes[i];
            bc.bits = get_bits(in);
            bc.mean = get<double>(in);
            bc.stdev = get<double>(in);
        }
    }
    return bank;
}

LineBank load_line_bank_file(const std::string& path, double* angleStepDeg) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("load_line_bank: cannot open " + path);
    return load_line_bank(in, angleStepDeg);
}

std::string barcode_to_string(const Barcode& b) {
    std::string s;
    s.reserve(b.bits.size());
    for (uint8_t v : b.bits) s += v ? '1' : '0';
    return s;
}

}  // namespace mbcal
