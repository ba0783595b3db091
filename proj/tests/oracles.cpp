#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace oracle {

VV to_vv(const dan::Matrix& m) {
    VV v(m.rows(), std::vector<double>(m.cols()));
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) v[i][j] = m(i, j);
    return v;
}

dan::Matrix from_vv(const VV& v) {
    dan::Matrix m(v.size(), v[0].size());
    for (std::size_t i = 0; i < v.size(); ++i)
        for (std::size_t j = 0; j < v[0].size(); ++j) m(i, j) = v[i][j];
    return m;
}

VV vv_mul(const VV& a, const VV& b) {
    const std::size_t n = a.size(), k = b.size(), m = b[0].size();
    VV c(n, std::vector<double>(m, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t l = 0; l < k; ++l)
            for (std::size_t j = 0; j < m; ++j) c[i][j] += a[i][l] * b[l][j];
    return c;
}

VV vv_transpose(const VV& a) {
    VV t(a[0].size(), std::vector<double>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[0].size(); ++j) t[j][i] = a[i][j];
    return t;
}

VV gauss_solve(VV a, VV b) {
    const std::size_t n = a.size();
    const std::size_t m = b[0].size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
        if (a[piv][col] == 0.0) throw std::runtime_error("gauss_solve: singular");
        std::swap(a[piv], a[col]);
        std::swap(b[piv], b[col]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            if (f == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            for (std::size_t c = 0; c < m; ++c) b[r][c] -= f * b[col][c];
        }
    }
    for (std::size_t col = n; col-- > 0;) {
        for (std::size_t c = 0; c < m; ++c) {
            double s = b[col][c];
            for (std::size_t k = col + 1; k < n; ++k) s -= a[col][k] * b[k][c];
            b[col][c] = s / a[col][col];
        }
    }
    return b;
}

VV gauss_inverse(const VV& a) {
    const std::size_t n = a.size();
    VV eye(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) eye[i][i] = 1.0;
    return gauss_solve(a, eye);
}

JacobiEig jacobi_eig(VV a) {
    const std::size_t n = a.size();
    VV v(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;

    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) norm += a[i][j] * a[i][j];
    norm = std::sqrt(norm);

    for (int sweep = 0; sweep < 200; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += 2.0 * a[i][j] * a[i][j];
        if (std::sqrt(off) <= 1e-12 * std::max(norm, 1e-300)) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (a[p][q] == 0.0) continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t =
                    (theta >= 0.0 ? 1.0 : -1.0) /
                    (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                const double app = a[p][p], aqq = a[q][q], apq = a[p][q];
                a[p][p] = c * c * app - 2.0 * s * c * apq + s * s * aqq;
                a[q][q] = s * s * app + 2.0 * s * c * apq + c * c * aqq;
                a[p][q] = a[q][p] = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    if (k == p || k == q) continue;
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = a[p][k] = c * akp - s * akq;
                    a[k][q] = a[q][k] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v[k][p], vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return a[x][x] > a[y][y]; });

    JacobiEig out;
    out.values.resize(n);
    out.vectors.assign(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        out.values[i] = a[order[i]][order[i]];
        for (std::size_t k = 0; k < n; ++k) out.vectors[i][k] = v[k][order[i]];
    }
    return out;
}

VV naive_patches(const dan::Image& img, std::size_t ph, std::size_t pw) {
    const std::size_t ch = img.channels;
    const std::size_t dim = ph * pw * ch;
    VV out;
    for (std::size_t y = 0; y + ph <= img.height; ++y) {
        for (std::size_t x = 0; x + pw <= img.width; ++x) {
            std::vector<double> row;
            row.reserve(dim);
            for (std::size_t u = 0; u < ph; ++u)
                for (std::size_t v = 0; v < pw; ++v)
                    for (std::size_t c = 0; c < ch; ++c)
                        row.push_back(img.at(y + u, x + v, c));
            const double mean =
                std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(dim);
            for (double& r : row) r -= mean;
            out.push_back(std::move(row));
        }
    }
    return out;
}

VV naive_correlate(const dan::Image& img, const std::vector<double>& filter,
                   std::size_t ph, std::size_t pw, bool pad) {
    const std::size_t ch = img.channels;
    const long oh = pad ? static_cast<long>(img.height)
                        : static_cast<long>(img.height) - static_cast<long>(ph) + 1;
    const long ow = pad ? static_cast<long>(img.width)
                        : static_cast<long>(img.width) - static_cast<long>(pw) + 1;
    const long off_h = pad ? static_cast<long>((ph - 1) / 2) : 0;
    const long off_w = pad ? static_cast<long>((pw - 1) / 2) : 0;
    VV out(oh, std::vector<double>(ow, 0.0));
    for (long y = 0; y < oh; ++y) {
        for (long x = 0; x < ow; ++x) {
            double s = 0.0;
            for (std::size_t u = 0; u < ph; ++u) {
                for (std::size_t v = 0; v < pw; ++v) {
                    const long iy = y + static_cast<long>(u) - off_h;
                    const long ix = x + static_cast<long>(v) - off_w;
                    if (iy < 0 || ix < 0 || iy >= static_cast<long>(img.height) ||
                        ix >= static_cast<long>(img.width))
                        continue;  // zero padding
                    for (std::size_t c = 0; c < ch; ++c)
                        s += filter[(u * pw + v) * ch + c] *
                             img.at(static_cast<std::size_t>(iy),
                                    static_cast<std::size_t>(ix), c);
                }
            }
            out[y][x] = s;
        }
    }
    return out;
}

std::vector<std::uint32_t> naive_hash(const std::vector<VV>& maps) {
    const std::size_t h = maps[0].size(), w = maps[0][0].size();
    std::vector<std::uint32_t> codes(h * w, 0);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            std::uint32_t code = 0;
            for (std::size_t i = 0; i < maps.size(); ++i) {
                const double heaviside = maps[i][y][x] > 0.0 ? 1.0 : 0.0;
                code += static_cast<std::uint32_t>(heaviside *
                                                   std::pow(2.0, static_cast<double>(i)));
            }
            codes[y * w + x] = code;
        }
    return codes;
}

std::vector<double> naive_block_hist(const std::vector<std::uint32_t>& codes,
                                     std::size_t h, std::size_t w, std::size_t bh,
                                     std::size_t bw, std::size_t stride_y,
                                     std::size_t stride_x, std::size_t bins) {
    std::vector<double> out;
    for (std::size_t y0 = 0; y0 + bh <= h; y0 += stride_y) {
        for (std::size_t x0 = 0; x0 + bw <= w; x0 += stride_x) {
            std::vector<double> hist(bins, 0.0);
            for (std::size_t y = y0; y < y0 + bh; ++y)
                for (std::size_t x = x0; x < x0 + bw; ++x) hist[codes[y * w + x]] += 1.0;
            out.insert(out.end(), hist.begin(), hist.end());
        }
    }
    return out;
}

std::vector<double> naive_spp_hist(const std::vector<std::uint32_t>& codes,
                                   std::size_t h, std::size_t w,
                                   const std::vector<std::size_t>& levels,
                                   std::size_t bins) {
    std::vector<double> out;
    for (std::size_t g : levels) {
        for (std::size_t i = 0; i < g; ++i) {
            for (std::size_t j = 0; j < g; ++j) {
                std::vector<double> hist(bins, 0.0);
                for (std::size_t y = i * h / g; y < (i + 1) * h / g; ++y)
                    for (std::size_t x = j * w / g; x < (j + 1) * w / g; ++x)
                        hist[codes[y * w + x]] += 1.0;
                out.insert(out.end(), hist.begin(), hist.end());
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Literal layer-stacked training
// ---------------------------------------------------------------------------

namespace {

VV one_hot_centered(const std::vector<int>& labels, std::size_t n_classes) {
    VV y(labels.size(), std::vector<double>(n_classes, 0.0));
    std::vector<double> mu(n_classes, 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        y[i][static_cast<std::size_t>(labels[i])] = 1.0;
        mu[static_cast<std::size_t>(labels[i])] += 1.0;
    }
    for (double& m : mu) m /= static_cast<double>(labels.size());
    for (auto& row : y)
        for (std::size_t c = 0; c < n_classes; ++c) row[c] -= mu[c];
    return y;
}

VV hconcat(const VV& a, const VV& b) {
    VV out = a;
    for (std::size_t i = 0; i < a.size(); ++i)
        out[i].insert(out[i].end(), b[i].begin(), b[i].end());
    return out;
}

VV ridge_primal(const VV& h, const VV& yc, double lambda) {
    VV ht = vv_transpose(h);
    VV s = vv_mul(ht, h);
    for (std::size_t i = 0; i < s.size(); ++i) s[i][i] += lambda;
    return vv_mul(gauss_inverse(s), vv_mul(ht, yc));
}

double signed_pow(double v, double beta) {
    if (beta == 1.0) return v;
    return v >= 0.0 ? std::pow(v, beta) : -std::pow(-v, beta);
}

}  // namespace

DanOracle dan_oracle_train(const VV& x, const std::vector<int>& labels,
                           std::size_t n_classes, std::size_t layers, double lambda,
                           double lambda_ft, double beta, bool relu) {
    DanOracle m;
    m.d = x[0].size();
    m.classes = n_classes;
    m.beta = beta;
    m.relu = relu;
    const VV yc = one_hot_centered(labels, n_classes);

    VV h = x;
    for (std::size_t l = 0; l < layers; ++l) {
        VV w = ridge_primal(h, yc, lambda);
        VV p = vv_mul(h, w);
        if (relu)
            for (auto& row : p)
                for (double& v : row) v = std::max(0.0, v);
        m.weights.push_back(std::move(w));
        m.p.push_back(p);
        h = hconcat(h, p);
    }

    VV q = m.p[0];
    for (std::size_t l = 1; l < layers; ++l) q = hconcat(q, m.p[l]);
    for (auto& row : q)
        for (double& v : row) v = signed_pow(v, beta);
    m.q = q;
    m.w_ft = ridge_primal(q, yc, lambda_ft);
    return m;
}

std::vector<double> dan_oracle_forward_q(const DanOracle& m,
                                         const std::vector<double>& x) {
    std::vector<double> h = x;
    std::vector<double> q;
    for (const VV& w : m.weights) {
        std::vector<double> p(m.classes, 0.0);
        for (std::size_t r = 0; r < h.size(); ++r)
            for (std::size_t c = 0; c < m.classes; ++c) p[c] += h[r] * w[r][c];
        if (m.relu)
            for (double& v : p) v = std::max(0.0, v);
        for (double v : p) q.push_back(signed_pow(v, m.beta));
        h.insert(h.end(), p.begin(), p.end());
    }
    return q;
}

std::vector<double> dan_oracle_scores(const DanOracle& m, const std::vector<double>& x) {
    const std::vector<double> q = dan_oracle_forward_q(m, x);
    std::vector<double> s(m.classes, 0.0);
    for (std::size_t r = 0; r < q.size(); ++r)
        for (std::size_t c = 0; c < m.classes; ++c) s[c] += q[r] * m.w_ft[r][c];
    return s;
}

int dan_oracle_predict(const DanOracle& m, const std::vector<double>& x) {
    const std::vector<double> s = dan_oracle_scores(m, x);
    std::size_t best = 0;
    for (std::size_t c = 1; c < s.size(); ++c)
        if (s[c] > s[best]) best = c;
    return static_cast<int>(best);
}

double naive_cosine_nn(const VV& train_x, const std::vector<int>& train_y,
                       const VV& test_x, const std::vector<int>& test_y) {
    auto norm = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x * x;
        return std::sqrt(s);
    };
    std::size_t hit = 0;
    for (std::size_t i = 0; i < test_x.size(); ++i) {
        double best = -2.0;
        std::size_t arg = 0;
        const double nq = norm(test_x[i]);
        for (std::size_t j = 0; j < train_x.size(); ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < test_x[i].size(); ++k)
                dot += test_x[i][k] * train_x[j][k];
            const double nt = norm(train_x[j]);
            const double cos =
                (nq > 0.0 && nt > 0.0) ? dot / (nq * nt) : 0.0;
            if (cos > best) {
                best = cos;
                arg = j;
            }
        }
        if (train_y[arg] == test_y[i]) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(test_x.size());
}

GridSeparator grid_separator_2d(const VV& x, const std::vector<double>& sign) {
    GridSeparator best;
    // Directions on a fine angular grid, bias swept over data projections.
    for (int ai = 0; ai < 720; ++ai) {
        const double ang = 3.14159265358979323846 * static_cast<double>(ai) / 360.0;
        const double wx = std::cos(ang), wy = std::sin(ang);
        double lo = 1e300, hi = -1e300;
        for (const auto& row : x) {
            const double pr = wx * row[0] + wy * row[1];
            lo = std::min(lo, pr);
            hi = std::max(hi, pr);
        }
        for (int bi = 0; bi <= 200; ++bi) {
            const double b =
                -(lo + (hi - lo) * static_cast<double>(bi) / 200.0);
            bool ok = true;
            for (std::size_t i = 0; i < x.size() && ok; ++i) {
                const double margin = sign[i] * (wx * x[i][0] + wy * x[i][1] + b);
                if (margin <= 0.0) ok = false;
            }
            if (ok) {
                best.w = {wx, wy};
                best.b = b;
                return best;
            }
        }
    }
    return best;
}

}  // namespace oracle
