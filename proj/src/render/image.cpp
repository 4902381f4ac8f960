#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstdlib>
#include <cstring>

#include <jpeglib.h>
#include <openssl/evp.h>
#include <png.h>

#include "sonic/render.hpp"

namespace sonic::render {

const char* to_string(RenderErrc e) {
    switch (e) {
        case RenderErrc::NavigationTimeout: return "NAVIGATION_TIMEOUT";
        case RenderErrc::CaptureFailed: return "CAPTURE_FAILED";
        case RenderErrc::LlmUnavailable: return "LLM_UNAVAILABLE";
        case RenderErrc::Codec: return "CODEC";
        case RenderErrc::InvalidInput: return "INVALID_INPUT";
    }
    return "?";
}

Raster crop_rows(const Raster& img, int y0, int h) {
    Raster out(img.width, h);
    std::size_t row = std::size_t(img.width) * 3;
    std::memcpy(out.rgb.data(), img.rgb.data() + row * y0, row * h);
    return out;
}

void paste_rows(Raster& dst, const Raster& src, int y0) {
    std::size_t row = std::size_t(dst.width) * 3;
    int h = std::min(src.height, dst.height - y0);
    if (h > 0) std::memcpy(dst.rgb.data() + row * y0, src.rgb.data(), row * h);
}

namespace {

// Weights of source cells [i, i+1) overlapping destination cell d scaled by ratio.
struct Span {
    int first;
    std::vector<double> w;
};

std::vector<Span> box_weights(int src, int dst) {
    std::vector<Span> spans(dst);
    double ratio = double(src) / dst;
    for (int d = 0; d < dst; ++d) {
        double a = d * ratio, b = (d + 1) * ratio;
        int i0 = int(a);
        int i1 = std::min(src, int(std::ceil(b)));
        spans[d].first = i0;
        for (int i = i0; i < i1; ++i) {
            double lo = std::max(a, double(i)), hi = std::min(b, double(i + 1));
            spans[d].w.push_back((hi - lo) / ratio);
        }
    }
    return spans;
}

}  // namespace

Raster resize_to_width(const Raster& img, int new_width) {
    if (img.width == new_width) return img;
    if (img.width <= 0 || img.height <= 0 || new_width <= 0) return Raster(std::max(new_width, 0), 0);
    int new_height = std::max(1, int(std::lround(double(img.height) * new_width / img.width)));

    auto wx = box_weights(img.width, new_width);
    auto wy = box_weights(img.height, new_height);

    // horizontal pass into floats, then vertical
    std::vector<float> tmp(std::size_t(new_width) * img.height * 3);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < new_width; ++x) {
            float acc[3] = {0, 0, 0};
            const auto& s = wx[x];
            for (std::size_t k = 0; k < s.w.size(); ++k) {
                const std::uint8_t* p = img.px(s.first + int(k), y);
                for (int c = 0; c < 3; ++c) acc[c] += float(s.w[k] * p[c]);
            }
            float* t = &tmp[(std::size_t(y) * new_width + x) * 3];
            for (int c = 0; c < 3; ++c) t[c] = acc[c];
        }

    Raster out(new_width, new_height);
    for (int y = 0; y < new_height; ++y) {
        const auto& s = wy[y];
        for (int x = 0; x < new_width; ++x) {
            float acc[3] = {0, 0, 0};
            for (std::size_t k = 0; k < s.w.size(); ++k) {
                const float* t = &tmp[(std::size_t(s.first + int(k)) * new_width + x) * 3];
                for (int c = 0; c < 3; ++c) acc[c] += float(s.w[k]) * t[c];
            }
            std::uint8_t* o = out.px(x, y);
            for (int c = 0; c < 3; ++c) o[c] = std::uint8_t(std::clamp(std::lround(acc[c]), 0L, 255L));
        }
    }
    return out;
}

// ---- png ----

Bytes encode_png(const Raster& img) {
    png_image im;
    std::memset(&im, 0, sizeof im);
    im.version = PNG_IMAGE_VERSION;
    im.width = img.width;
    im.height = img.height;
    im.format = PNG_FORMAT_RGB;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&im, nullptr, &size, 0, img.rgb.data(), 0, nullptr))
        throw RenderError(RenderErrc::Codec, std::string("png encode: ") + im.message);
    Bytes out(size);
    if (!png_image_write_to_memory(&im, out.data(), &size, 0, img.rgb.data(), 0, nullptr))
        throw RenderError(RenderErrc::Codec, std::string("png encode: ") + im.message);
    out.resize(size);
    return out;
}

Raster decode_png(const Bytes& png) {
    png_image im;
    std::memset(&im, 0, sizeof im);
    im.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&im, png.data(), png.size()))
        throw RenderError(RenderErrc::Codec, std::string("png decode: ") + im.message);
    im.format = PNG_FORMAT_RGB;
    Raster out(int(im.width), int(im.height));
    // composite any alpha onto white, as a browser screenshot would show it
    png_color white{255, 255, 255};
    if (!png_image_finish_read(&im, &white, out.rgb.data(), 0, nullptr)) {
        png_image_free(&im);
        throw RenderError(RenderErrc::Codec, std::string("png decode: ") + im.message);
    }
    return out;
}

// ---- jpeg ----

namespace {

struct JpegErr {
    jpeg_error_mgr mgr;
    std::jmp_buf jmp;
    char msg[JMSG_LENGTH_MAX];
};

void jpeg_fail(j_common_ptr c) {
    auto* e = reinterpret_cast<JpegErr*>(c->err);
    c->err->format_message(c, e->msg);
    std::longjmp(e->jmp, 1);
}

void jpeg_quiet(j_common_ptr, int) {}

}  // namespace

Bytes encode_jpeg(const Raster& img, int quality) {
    if (img.width <= 0 || img.height <= 0) throw RenderError(RenderErrc::Codec, "jpeg encode: empty image");
    jpeg_compress_struct cinfo;
    JpegErr err;
    cinfo.err = jpeg_std_error(&err.mgr);
    err.mgr.error_exit = jpeg_fail;
    unsigned char* buf = nullptr;
    unsigned long len = 0;
    if (setjmp(err.jmp)) {
        jpeg_destroy_compress(&cinfo);
        std::free(buf);
        throw RenderError(RenderErrc::Codec, std::string("jpeg encode: ") + err.msg);
    }
    jpeg_create_compress(&cinfo);
    jpeg_mem_dest(&cinfo, &buf, &len);
    cinfo.image_width = img.width;
    cinfo.image_height = img.height;
    cinfo.input_components = 3;
    cinfo.in_color_space = JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, std::clamp(quality, 1, 100), TRUE);
    cinfo.optimize_coding = TRUE;
    jpeg_start_compress(&cinfo, TRUE);
    while (cinfo.next_scanline < cinfo.image_height) {
        JSAMPROW row = const_cast<JSAMPROW>(img.px(0, int(cinfo.next_scanline)));
        jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    Bytes out(buf, buf + len);
    jpeg_destroy_compress(&cinfo);
    std::free(buf);
    return out;
}

Raster decode_jpeg(const Bytes& jpg) {
    jpeg_decompress_struct cinfo;
    JpegErr err;
    cinfo.err = jpeg_std_error(&err.mgr);
    err.mgr.error_exit = jpeg_fail;
    err.mgr.emit_message = jpeg_quiet;
    // raw storage so nothing with a destructor lives across setjmp
    std::uint8_t* pixels = nullptr;
    int w = 0, h = 0;
    if (setjmp(err.jmp)) {
        jpeg_destroy_decompress(&cinfo);
        std::free(pixels);
        throw RenderError(RenderErrc::Codec, std::string("jpeg decode: ") + err.msg);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, jpg.data(), jpg.size());
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    w = int(cinfo.output_width);
    h = int(cinfo.output_height);
    pixels = static_cast<std::uint8_t*>(std::malloc(std::size_t(w) * h * 3));
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = pixels + std::size_t(cinfo.output_scanline) * w * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    Raster out(w, h);
    std::memcpy(out.rgb.data(), pixels, out.rgb.size());
    std::free(pixels);
    return out;
}

// ---- base64 ----

std::string base64_encode(const Bytes& b) {
    std::string out(4 * ((b.size() + 2) / 3), '\0');
    int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), b.data(), int(b.size()));
    out.resize(std::size_t(n));
    return out;
}

Bytes base64_decode(const std::string& in) {
    std::string s;
    s.reserve(in.size());
    for (char c : in)
        if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
    if (s.size() % 4) throw RenderError(RenderErrc::InvalidInput, "base64 length not a multiple of 4");
    Bytes out(s.size() / 4 * 3);
    int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(s.data()), int(s.size()));
    if (n < 0) throw RenderError(RenderErrc::InvalidInput, "invalid base64");
    // EVP_DecodeBlock keeps the bytes that padding stands for
    std::size_t pad = 0;
    if (!s.empty() && s.back() == '=') ++pad;
    if (s.size() > 1 && s[s.size() - 2] == '=') ++pad;
    out.resize(std::size_t(n) - pad);
    return out;
}

// ---- strips ----

Bytes StripSet::concat() const {
    Bytes out;
    for (const auto& s : strips) out.insert(out.end(), s.begin(), s.end());
    return out;
}

std::vector<std::uint32_t> StripSet::sizes() const {
    std::vector<std::uint32_t> v;
    for (const auto& s : strips) v.push_back(static_cast<std::uint32_t>(s.size()));
    return v;
}

StripSet compress_strips(const Raster& img, int quality, int strip_height) {
    if (strip_height <= 0) throw RenderError(RenderErrc::InvalidInput, "strip height must be positive");
    StripSet s;
    s.strip_height = strip_height;
    s.codec = format::Codec::Jpeg;
    for (int y = 0; y < img.height; y += strip_height) {
        int h = std::min(strip_height, img.height - y);
        s.strips.push_back(encode_jpeg(crop_rows(img, y, h), quality));
    }
    return s;
}

Raster decode_strip(const Bytes& data, format::Codec codec, int width, int height) {
    Raster r;
    switch (codec) {
        case format::Codec::Jpeg: r = decode_jpeg(data); break;
        case format::Codec::Raw:
            if (data.size() != std::size_t(width) * height * 3)
                throw RenderError(RenderErrc::Codec, "raw strip has the wrong size");
            r = Raster(width, height);
            r.rgb = data;
            break;
        default: throw RenderError(RenderErrc::Codec, "unsupported strip codec");
    }
    if (r.width != width || r.height != height) throw RenderError(RenderErrc::Codec, "strip dimensions mismatch");
    return r;
}

Raster decompress_strips(const StripSet& s, int width, int height) {
    Raster out(width, height);
    for (std::size_t i = 0; i < s.strips.size(); ++i) {
        int y0 = int(i) * s.strip_height;
        int h = strip_rows(int(i), height, s.strip_height);
        if (h <= 0) break;
        paste_rows(out, decode_strip(s.strips[i], s.codec, width, h), y0);
    }
    return out;
}

}  // namespace sonic::render
