#pragma once

// Little-endian binary primitives shared by the graph cache and checkpoints.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "qmol/common.hpp"

namespace qmol::serial {

class Writer {
  public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_.good()) throw IoError("cannot open for writing: " + path);
    }

    void u8(std::uint8_t v) { raw(&v, 1); }
    void u32(std::uint32_t v) { raw(&v, 4); }
    void u64(std::uint64_t v) { raw(&v, 8); }
    void f64(double v) { raw(&v, 8); }

    void f64_vec(const std::vector<double>& v) {
        u64(v.size());
        if (!v.empty()) raw(v.data(), v.size() * 8);
    }

    void str(const std::string& s) {
        u64(s.size());
        raw(s.data(), s.size());
    }

    void raw(const void* p, std::size_t n) {
        out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
        if (!out_.good()) throw IoError("write failure");
    }

  private:
    std::ofstream out_;
};

class Reader {
  public:
    explicit Reader(const std::string& path) : in_(path, std::ios::binary) {
        if (!in_.good()) throw IoError("cannot open for reading: " + path);
    }

    std::uint8_t u8() {
        std::uint8_t v;
        raw(&v, 1);
        return v;
    }
    std::uint32_t u32() {
        std::uint32_t v;
        raw(&v, 4);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        raw(&v, 8);
        return v;
    }
    double f64() {
        double v;
        raw(&v, 8);
        return v;
    }

    std::vector<double> f64_vec() {
        const std::uint64_t n = u64();
        if (n > (1ULL << 32)) throw CorruptCacheError("implausible vector length");
        std::vector<double> v(n);
        if (n) raw(v.data(), n * 8);
        return v;
    }

    std::string str() {
        const std::uint64_t n = u64();
        if (n > (1ULL << 24)) throw CorruptCacheError("implausible string length");
        std::string s(n, '\0');
        raw(s.data(), n);
        return s;
    }

    void raw(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (in_.gcount() != static_cast<std::streamsize>(n)) throw CorruptCacheError("unexpected end of file");
    }

    bool at_eof() {
        in_.peek();
        return in_.eof();
    }

  private:
    std::ifstream in_;
};

inline std::uint64_t file_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) throw IoError("cannot read: " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[65536];
    while (in.good()) {
        in.read(buf, sizeof buf);
        h = fnv1a(buf, static_cast<std::size_t>(in.gcount()), h);
    }
    return h;
}

}  // namespace qmol::serial
