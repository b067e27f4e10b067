#include "mbcal/mask.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace mbcal {

size_t Mask::foreground_count() const {
    size_t n = 0;
    for (uint8_t b : bits) n += b;
    return n;
}

void Mask::update_bbox() {
    bboxX0 = width;
    bboxY0 = height;
    bboxX1 = -1;
    bboxY1 = -1;
    for (int y = 0; y < height; ++y) {
        const uint8_t* row = bits.data() + static_cast<size_t>(y) * width;
        for (int x = 0; x < width; ++x) {
            if (!row[x]) continue;
            if (x < bboxX0) bboxX0 = x;
            if (x > bboxX1) bboxX1 = x;
            if (y < bboxY0) bboxY0 = y;
            if (y > bboxY1) bboxY1 = y;
        }
    }
    if (bboxX1 < 0) {
        bboxX0 = 0;
        bboxY0 = 0;
    }
}

namespace {

[[noreturn]] void fail(std::istream& in, const std::string& what) {
    const auto off = in.tellg();
    std::ostringstream msg;
    msg << "load_mask: " << what << " at byte offset " << (off < 0 ? -1 : static_cast<long>(off));
    throw FormatError(msg.str());
}

// Next header token, skipping whitespace and '#' comments.
std::string header_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {}
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok += static_cast<char>(c);
    }
    if (tok.empty()) fail(in, "unexpected end of header");
    return tok;
}

int header_int(std::istream& in, const char* name) {
    const std::string tok = header_token(in);
    try {
        size_t pos = 0;
        const int v = std::stoi(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        fail(in, std::string("bad ") + name + " '" + tok + "'");
    }
}

}  // namespace

Mask load_mask(std::istream& in, int frameIndex) {
    if (header_token(in) != "P5") fail(in, "missing P5 magic");
    const int w = header_int(in, "width");
    const int h = header_int(in, "height");
    const int maxval = header_int(in, "maxval");
    if (w <= 0 || h <= 0) fail(in, "non-positive dimensions");
    if (maxval <= 0 || maxval > 255) fail(in, "maxval out of range (must be <= 255)");
    // The header is terminated by exactly one whitespace byte, already
    // consumed by header_int.
    Mask m(w, h, frameIndex);
    std::vector<char> raw(static_cast<size_t>(w) * h);
    in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (static_cast<size_t>(in.gcount()) != raw.size()) fail(in, "truncated pixel payload");
    for (size_t i = 0; i < raw.size(); ++i)
        m.bits[i] = static_cast<uint8_t>(raw[i]) >= 128 ? 1 : 0;
    m.update_bbox();
    return m;
}

Mask load_mask_file(const std::string& path, int frameIndex) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("load_mask: cannot open " + path);
    return load_mask(in, frameIndex);
}

void save_mask(const Mask& mask, std::ostream& out) {
    out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
    std::vector<char> raw(mask.bits.size());
    for (size_t i = 0; i < raw.size(); ++i)
        raw[i] = mask.bits[i] ? static_cast<char>(255) : 0;
    out.write(raw.data(), static_cast<std::streamsize>(raw.size()));
}

void save_mask_file(const Mask& mask, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("save_mask: cannot open " + path);
    save_mask(mask, out);
    if (!out) throw Error("save_mask: write failed for " + path);
}

}  // namespace mbcal
