#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace dsrl {

/// Dense tensor with up to 4 dims, contiguous row-major storage.
template <typename T>
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> dims) { resize(std::move(dims)); }

    void resize(std::vector<int> dims) {
        dims_ = std::move(dims);
        std::size_t n = 1;
        for (int d : dims_) {
            if (d <= 0) throw std::invalid_argument("Tensor: non-positive dim");
            n *= static_cast<std::size_t>(d);
        }
        data_.assign(n, T{});
    }

    int rank() const { return static_cast<int>(dims_.size()); }
    int dim(int i) const { return dims_[static_cast<std::size_t>(i)]; }
    const std::vector<int>& dims() const { return dims_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
    void zero() { fill(T{}); }

    typename std::vector<T>::iterator begin() { return data_.begin(); }
    typename std::vector<T>::iterator end() { return data_.end(); }
    typename std::vector<T>::const_iterator begin() const { return data_.begin(); }
    typename std::vector<T>::const_iterator end() const { return data_.end(); }

    bool same_shape(const Tensor& o) const { return dims_ == o.dims_; }

private:
    std::vector<int> dims_;
    std::vector<T> data_;
};

// --- flat binary parameter files ---
// magic, record count, then per record a shape header and a little-endian
// float32 payload. All models persist through this one format.

inline constexpr char kParamsMagic[8] = {'D', 'S', 'R', 'L', 'N', 'N', '0', '1'};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    char b[4];
    b[0] = static_cast<char>(v & 0xff);
    b[1] = static_cast<char>((v >> 8) & 0xff);
    b[2] = static_cast<char>((v >> 16) & 0xff);
    b[3] = static_cast<char>((v >> 24) & 0xff);
    out.append(b, 4);
}

inline std::uint32_t get_u32(const std::string& in, std::size_t& pos) {
    if (pos + 4 > in.size()) throw std::runtime_error("params file truncated");
    auto u = [&](std::size_t i) { return static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])); };
    std::uint32_t v = u(0) | (u(1) << 8) | (u(2) << 16) | (u(3) << 24);
    pos += 4;
    return v;
}

inline void put_f32(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

inline float get_f32(const std::string& in, std::size_t& pos) {
    std::uint32_t bits = get_u32(in, pos);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

} // namespace detail

template <typename T>
std::string serialize_params(const std::vector<const Tensor<T>*>& tensors) {
    std::string out(kParamsMagic, sizeof(kParamsMagic));
    detail::put_u32(out, static_cast<std::uint32_t>(tensors.size()));
    for (const Tensor<T>* t : tensors) {
        detail::put_u32(out, static_cast<std::uint32_t>(t->rank()));
        for (int i = 0; i < t->rank(); ++i) detail::put_u32(out, static_cast<std::uint32_t>(t->dim(i)));
        for (std::size_t i = 0; i < t->size(); ++i) detail::put_f32(out, static_cast<float>((*t)[i]));
    }
    return out;
}

/// Loads records into pre-shaped tensors; shape mismatch is an error.
template <typename T>
void deserialize_params(const std::string& bytes, const std::vector<Tensor<T>*>& tensors) {
    if (bytes.size() < sizeof(kParamsMagic) ||
        std::memcmp(bytes.data(), kParamsMagic, sizeof(kParamsMagic)) != 0)
        throw std::runtime_error("params file: bad magic");
    std::size_t pos = sizeof(kParamsMagic);
    std::uint32_t count = detail::get_u32(bytes, pos);
    if (count != tensors.size()) throw std::runtime_error("params file: record count mismatch");
    for (Tensor<T>* t : tensors) {
        std::uint32_t rank = detail::get_u32(bytes, pos);
        std::vector<int> dims(rank);
        for (auto& d : dims) d = static_cast<int>(detail::get_u32(bytes, pos));
        if (dims != t->dims()) throw std::runtime_error("params file: shape mismatch");
        for (std::size_t i = 0; i < t->size(); ++i) (*t)[i] = static_cast<T>(detail::get_f32(bytes, pos));
    }
}

template <typename T>
void save_params(const std::string& path, const std::vector<const Tensor<T>*>& tensors) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_params: cannot open " + path);
    std::string bytes = serialize_params(tensors);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

template <typename T>
void load_params(const std::string& path, const std::vector<Tensor<T>*>& tensors) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_params: cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    deserialize_params(bytes, tensors);
}

} // namespace dsrl
