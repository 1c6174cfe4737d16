#include "fbsde/serialize.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fbsde/errors.hpp"

namespace fbsde {

std::string format_double(double v) {
    std::array<char, 40> buf;
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v,
                                   std::chars_format::general, 17);
    return std::string(buf.data(), res.ptr);
}

namespace {

constexpr char kMagic[8] = {'B', 'S', 'D', 'E', 'L', 'A', 'B', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kKindEnsemble = 1;
constexpr std::uint32_t kKindSurface = 2;

// Explicit little-endian byte emission keeps the format portable.
template <typename T>
void put(std::ostream& os, T value) {
    static_assert(std::is_integral_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i)
        os.put(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) &
                                 0xff));
}

void put_f64(std::ostream& os, double v) {
    put(os, std::bit_cast<std::uint64_t>(v));
}

template <typename T>
T take(std::istream& is) {
    std::uint64_t acc = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        const int c = is.get();
        if (c < 0) throw LabError("container truncated");
        acc |= static_cast<std::uint64_t>(static_cast<unsigned char>(c))
               << (8 * i);
    }
    return static_cast<T>(acc);
}

double take_f64(std::istream& is) {
    return std::bit_cast<double>(take<std::uint64_t>(is));
}

void write_header(std::ostream& os, std::uint32_t kind) {
    os.write(kMagic, sizeof(kMagic));
    put(os, kVersion);
    put(os, kind);
}

std::uint32_t read_header(std::istream& is) {
    char magic[8];
    is.read(magic, sizeof(magic));
    if (is.gcount() != sizeof(magic) ||
        std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw LabError("bad container magic");
    const auto version = take<std::uint32_t>(is);
    if (version != kVersion)
        throw LabError("unsupported container version " +
                       std::to_string(version));
    return take<std::uint32_t>(is);
}

std::ofstream open_out(const std::string& path, bool binary) {
    std::ofstream os(path, binary ? std::ios::binary : std::ios::out);
    if (!os) throw LabError("cannot open for writing: " + path);
    return os;
}

std::ifstream open_in(const std::string& path, bool binary) {
    std::ifstream is(path, binary ? std::ios::binary : std::ios::in);
    if (!is) throw LabError("cannot open for reading: " + path);
    return is;
}

}  // namespace

void write_ensemble(const std::string& path, const FbmEnsemble& ensemble) {
    std::ofstream os = open_out(path, true);
    write_header(os, kKindEnsemble);
    put_f64(os, ensemble.hurst);
    put(os, static_cast<std::uint32_t>(ensemble.kind));
    put(os, std::uint32_t{0});
    put(os, ensemble.seed);
    put(os, static_cast<std::uint64_t>(ensemble.grid.size()));
    for (double t : ensemble.grid) put_f64(os, t);
    put(os, static_cast<std::uint64_t>(ensemble.paths.rows()));
    for (Eigen::Index j = 0; j < ensemble.paths.cols(); ++j)
        for (Eigen::Index i = 0; i < ensemble.paths.rows(); ++i)
            put_f64(os, ensemble.paths(i, j));
    if (!os) throw LabError("write failed: " + path);
}

FbmEnsemble read_ensemble(const std::string& path) {
    std::ifstream is = open_in(path, true);
    if (read_header(is) != kKindEnsemble)
        throw LabError("container does not hold an ensemble: " + path);
    FbmEnsemble out;
    out.hurst = take_f64(is);
    out.kind = static_cast<PathKind>(take<std::uint32_t>(is));
    take<std::uint32_t>(is);
    out.seed = take<std::uint64_t>(is);
    const auto ng = take<std::uint64_t>(is);
    out.grid.resize(ng);
    for (auto& t : out.grid) t = take_f64(is);
    const auto np = take<std::uint64_t>(is);
    out.paths.resize(static_cast<Eigen::Index>(np),
                     static_cast<Eigen::Index>(ng));
    for (Eigen::Index j = 0; j < out.paths.cols(); ++j)
        for (Eigen::Index i = 0; i < out.paths.rows(); ++i)
            out.paths(i, j) = take_f64(is);
    return out;
}

void write_surface(const std::string& path, const PdeSolution& sol,
                   const std::string& meta_json) {
    std::ofstream os = open_out(path, true);
    write_header(os, kKindSurface);
    put(os, static_cast<std::uint64_t>(sol.t_grid.size()));
    for (double t : sol.t_grid) put_f64(os, t);
    put(os, static_cast<std::uint64_t>(sol.x_grid.size()));
    for (double x : sol.x_grid) put_f64(os, x);
    put_f64(os, sol.sigma_at_horizon);
    put(os, static_cast<std::uint64_t>(meta_json.size()));
    os.write(meta_json.data(), static_cast<std::streamsize>(meta_json.size()));
    for (const Eigen::MatrixXd* m : {&sol.u, &sol.ux, &sol.uxx})
        for (Eigen::Index i = 0; i < m->rows(); ++i)
            for (Eigen::Index j = 0; j < m->cols(); ++j)
                put_f64(os, (*m)(i, j));
    // Variance table samples; zero count means the surface carries none.
    const auto& it = sol.iota_table.sample_times();
    put(os, static_cast<std::uint64_t>(it.size()));
    if (!it.empty()) {
        put_f64(os, sol.iota_table.horizon());
        for (double t : it) put_f64(os, t);
        for (double v : sol.iota_table.sample_values()) put_f64(os, v);
        for (double d : sol.iota_table.sample_derivatives()) put_f64(os, d);
    }
    if (!os) throw LabError("write failed: " + path);
}

PdeSolution read_surface(const std::string& path, std::string* meta_json) {
    std::ifstream is = open_in(path, true);
    if (read_header(is) != kKindSurface)
        throw LabError("container does not hold a surface: " + path);
    PdeSolution out;
    const auto nt = take<std::uint64_t>(is);
    out.t_grid.resize(nt);
    for (auto& t : out.t_grid) t = take_f64(is);
    const auto nx = take<std::uint64_t>(is);
    out.x_grid.resize(nx);
    for (auto& x : out.x_grid) x = take_f64(is);
    out.sigma_at_horizon = take_f64(is);
    const auto ml = take<std::uint64_t>(is);
    std::string meta(ml, '\0');
    is.read(meta.data(), static_cast<std::streamsize>(ml));
    if (meta_json) *meta_json = meta;
    for (Eigen::MatrixXd* m : {&out.u, &out.ux, &out.uxx}) {
        m->resize(static_cast<Eigen::Index>(nt), static_cast<Eigen::Index>(nx));
        for (Eigen::Index i = 0; i < m->rows(); ++i)
            for (Eigen::Index j = 0; j < m->cols(); ++j)
                (*m)(i, j) = take_f64(is);
    }
    const auto ni = take<std::uint64_t>(is);
    if (ni > 0) {
        const double T = take_f64(is);
        std::vector<double> t(ni), v(ni), d(ni);
        for (auto& x : t) x = take_f64(is);
        for (auto& x : v) x = take_f64(is);
        for (auto& x : d) x = take_f64(is);
        out.iota_table = IotaTable(T, std::move(t), std::move(v), std::move(d));
    }
    return out;
}

void write_ensemble_csv(const std::string& path, const FbmEnsemble& ensemble) {
    std::ofstream os = open_out(path, false);
    os << "path";
    for (double t : ensemble.grid) os << ',' << format_double(t);
    os << '\n';
    for (Eigen::Index i = 0; i < ensemble.paths.rows(); ++i) {
        os << i;
        for (Eigen::Index j = 0; j < ensemble.paths.cols(); ++j)
            os << ',' << format_double(ensemble.paths(i, j));
        os << '\n';
    }
    if (!os) throw LabError("write failed: " + path);
}

void write_csv(const std::string& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
    std::ofstream os = open_out(path, false);
    for (std::size_t i = 0; i < header.size(); ++i)
        os << (i ? "," : "") << header[i];
    os << '\n';
    for (const auto& row : rows) {
        if (row.size() != header.size())
            throw LabError("csv row width mismatch");
        for (std::size_t i = 0; i < row.size(); ++i)
            os << (i ? "," : "") << format_double(row[i]);
        os << '\n';
    }
    if (!os) throw LabError("write failed: " + path);
}

void read_two_column_csv(const std::string& path, std::vector<double>& a,
                         std::vector<double>& b) {
    std::ifstream is = open_in(path, false);
    a.clear();
    b.clear();
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string f1, f2;
        if (!std::getline(ls, f1, ',') || !std::getline(ls, f2, ','))
            throw LabError("expected two comma-separated columns: " + line);
        try {
            const double v1 = std::stod(f1);
            const double v2 = std::stod(f2);
            a.push_back(v1);
            b.push_back(v2);
        } catch (const std::exception&) {
            // Allow one non-numeric header line.
            if (!a.empty() || !b.empty())
                throw LabError("non-numeric row in table: " + line);
        }
    }
    if (a.empty()) throw LabError("table is empty: " + path);
}

std::string file_digest(const std::string& path) {
    std::ifstream is = open_in(path, true);
    std::uint64_t hash = 14695981039346656037ull;
    char buf[65536];
    while (is) {
        is.read(buf, sizeof(buf));
        const std::streamsize got = is.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            hash ^= static_cast<unsigned char>(buf[i]);
            hash *= 1099511628211ull;
        }
    }
    static const char* hex = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = hex[hash & 0xf];
        hash >>= 4;
    }
    return out;
}

}  // namespace fbsde
