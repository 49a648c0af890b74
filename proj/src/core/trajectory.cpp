#include "nlt/core/trajectory.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nlt/core/errors.hpp"

namespace nlt {

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

std::string Trajectory::csv() const {
    std::ostringstream os;
    os << "t,rho,I,dist1inf,norm2inf,denomL1\n";
    for (size_t i = 0; i < t.size(); ++i) {
        auto col = [&](const std::vector<double>& v) {
            return i < v.size() ? format_double(v[i]) : std::string("nan");
        };
        os << col(t) << ',' << col(rho) << ',' << col(I) << ',' << col(dist1inf) << ','
           << col(norm2inf) << ',' << col(denom) << '\n';
    }
    return os.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    fs::path target(path);
    if (target.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(target.parent_path(), ec);
        if (ec) throw std::runtime_error("cannot create directory " + target.parent_path().string() + ": " + ec.message());
    }
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out << content;
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw std::runtime_error("cannot rename " + tmp.string() + " to " + path + ": " + ec.message());
}

double log_derivative_residual(const Trajectory& traj) {
    bool steps = traj.step_t.size() >= 3;
    const auto& T = steps ? traj.step_t : traj.t;
    const auto& I = steps ? traj.step_I : traj.I;
    const auto& R = steps ? traj.step_rho : traj.rho;
    const size_t n = T.size();
    if (n < 3) throw DomainError("log derivative residual needs at least 3 samples");
    double worst = 0.0;
    for (size_t i = 1; i + 1 < n; ++i) {
        double d = (std::log(I[i + 1]) - std::log(I[i - 1])) / (T[i + 1] - T[i - 1]);
        double r = std::abs(d - (traj.p * R[i] - 1.0)) / traj.p;
        worst = std::max(worst, r);
    }
    return worst;
}

}  // namespace nlt
