#include "coogan/npy.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace coogan::npy {

namespace {
const char kMagic[] = "\x93NUMPY";
}

void save(const std::string& path, const Tensor& t) {
    std::ostringstream dict;
    dict << "{'descr': '<f8', 'fortran_order': False, 'shape': (";
    for (i64 i = 0; i < t.ndim(); ++i) dict << t.dim(static_cast<int>(i)) << ", ";
    if (t.ndim() == 0) dict << "";
    dict << "), }";
    std::string header = dict.str();
    // pad so that magic(6)+ver(2)+len(2)+header is a multiple of 64
    size_t unpadded = 10 + header.size() + 1;
    size_t pad = (64 - unpadded % 64) % 64;
    header.append(pad, ' ');
    header.push_back('\n');

    std::ofstream f(path, std::ios::binary);
    if (!f) throw data_error("npy: cannot open for write: " + path);
    f.write(kMagic, 6);
    f.put('\x01');
    f.put('\x00');
    const std::uint16_t hlen = static_cast<std::uint16_t>(header.size());
    f.put(static_cast<char>(hlen & 0xff));
    f.put(static_cast<char>(hlen >> 8));
    f.write(header.data(), static_cast<std::streamsize>(header.size()));
    f.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(double)));
    if (!f) throw data_error("npy: write failed: " + path);
}

Tensor load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw data_error("npy: cannot open: " + path);
    char magic[6];
    f.read(magic, 6);
    if (!f || std::memcmp(magic, kMagic, 6) != 0) throw data_error("npy: bad magic: " + path);
    char ver[2];
    f.read(ver, 2);
    if (ver[0] != 1) throw data_error("npy: unsupported version in " + path);
    unsigned char lenb[2];
    f.read(reinterpret_cast<char*>(lenb), 2);
    const size_t hlen = static_cast<size_t>(lenb[0]) | (static_cast<size_t>(lenb[1]) << 8);
    std::string header(hlen, '\0');
    f.read(header.data(), static_cast<std::streamsize>(hlen));
    if (!f) throw data_error("npy: truncated header: " + path);

    if (header.find("'<f8'") == std::string::npos)
        throw data_error("npy: expected float64 data in " + path);
    if (header.find("'fortran_order': False") == std::string::npos)
        throw data_error("npy: expected C-order data in " + path);
    const size_t lp = header.find('(');
    const size_t rp = header.find(')', lp);
    if (lp == std::string::npos || rp == std::string::npos)
        throw data_error("npy: malformed shape in " + path);
    std::vector<i64> shape;
    std::string inner = header.substr(lp + 1, rp - lp - 1);
    std::stringstream ss(inner);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        std::string trimmed;
        for (char c : tok)
            if (!isspace(static_cast<unsigned char>(c))) trimmed += c;
        if (!trimmed.empty()) shape.push_back(std::stoll(trimmed));
    }
    Tensor t(shape);
    f.read(reinterpret_cast<char*>(t.data()),
           static_cast<std::streamsize>(t.numel() * sizeof(double)));
    if (!f) throw data_error("npy: truncated data: " + path);
    return t;
}

}  // namespace coogan::npy
