#include "url/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "url/rng.hpp"

namespace url {

namespace {

// C[m,n] += A[m,k] * B[k,n]
void acc_mm_nn(const double* a, const double* b, double* c, std::int64_t m, std::int64_t k,
               std::int64_t n) {
    for (std::int64_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        const double* arow = a + i * k;
        for (std::int64_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = b + p * n;
            for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// Active degree-1 hat bases at u in [0,1] over `knots` uniform knots.
// Writes up to two (index, weight) entries; weight may be zero for the upper
// index so that right-derivatives at knots stay well-defined.
int hat_active(double u, int knots, int idx[2], double w[2]) {
    const double t = u * (knots - 1);
    int i0 = static_cast<int>(std::floor(t));
    if (i0 >= knots - 1) {
        idx[0] = knots - 1;
        w[0] = 1.0;
        return 1;
    }
    if (i0 < 0) i0 = 0;
    const double frac = t - i0;
    idx[0] = i0;
    w[0] = 1.0 - frac;
    idx[1] = i0 + 1;
    w[1] = frac;
    return 2;
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

void check_param_shape(const Tensor& t, std::initializer_list<std::int64_t> shape,
                       const char* name) {
    if (t.shape() != std::vector<std::int64_t>(shape))
        throw ValidationError(std::string("model: unexpected shape for ") + name);
}

std::string conv_name(const char* block, int layer, const char* part) {
    std::ostringstream os;
    os << "encoder." << block << "." << layer << "." << part;
    return os.str();
}

}  // namespace

void EncoderConfig::validate() const {
    if (input_dim <= 0 || hidden_dim <= 0 || mlp_z_hidden <= 0)
        throw ValidationError("encoder config: dimensions must be positive");
    if (spline_layers_2d < 0 || spline_layers_3d < 0)
        throw ValidationError("encoder config: negative layer count");
    if (kernel_knots < 2) throw ValidationError("encoder config: kernel_knots must be >= 2");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw ValidationError("encoder config: dropout_rate must be in [0,1)");
    if (label_smoothing < 0.0 || label_smoothing >= 1.0)
        throw ValidationError("encoder config: label_smoothing must be in [0,1)");
    if (universe_size <= 0) throw ValidationError("encoder config: universe_size must be positive");
}

SoftMatching::SoftMatching(Tensor v) : values(std::move(v)) {
    if (values.rank() != 2) throw ValidationError("soft matching: matrix expected");
    for (std::int64_t i = 0; i < values.dim(0); ++i) {
        double row_sum = 0.0;
        for (std::int64_t j = 0; j < values.dim(1); ++j) {
            const double p = values.at(i, j);
            if (p < 0.0 || p > 1.0)
                throw ValidationError("soft matching: entry outside [0,1]");
            row_sum += p;
        }
        if (std::abs(row_sum - 1.0) > 1e-9)
            throw ValidationError("soft matching: row does not sum to 1");
    }
}

SplineGeometry SplineGeometry::build(const Graph& graph, int knots) {
    SplineGeometry geo;
    geo.node_count = graph.node_count;
    geo.knots = knots;
    geo.inv_2r = 1.0 / (2.0 * pseudo_scale(graph));

    const int m = graph.node_count;
    geo.row_ptr.assign(static_cast<std::size_t>(m) + 1, 0);
    for (auto [src, dst] : graph.edges) {
        (void)dst;
        ++geo.row_ptr[static_cast<std::size_t>(src) + 1];
    }
    for (int v = 0; v < m; ++v)
        geo.row_ptr[static_cast<std::size_t>(v) + 1] += geo.row_ptr[static_cast<std::size_t>(v)];
    geo.inv_degree.resize(static_cast<std::size_t>(m));
    for (int v = 0; v < m; ++v) {
        const int deg = geo.row_ptr[static_cast<std::size_t>(v) + 1] -
                        geo.row_ptr[static_cast<std::size_t>(v)];
        geo.inv_degree[static_cast<std::size_t>(v)] = 1.0 / std::max(1, deg);
    }

    // graph.edges is sorted by (src, dst), so it already is in CSR order.
    const PseudoCoords u2 = pseudo_coords(graph);
    geo.combo_ptr.assign(graph.edges.size() + 1, 0);
    for (std::size_t e = 0; e < graph.edges.size(); ++e) {
        geo.neighbor.push_back(graph.edges[e].second);
        int ix[2], iy[2];
        double wx[2], wy[2];
        const int nx = hat_active(u2.at(static_cast<int>(e), 0), knots, ix, wx);
        const int ny = hat_active(u2.at(static_cast<int>(e), 1), knots, iy, wy);
        for (int a = 0; a < nx; ++a) {
            for (int b = 0; b < ny; ++b) {
                const double w = wx[a] * wy[b];
                if (w == 0.0) continue;
                geo.combo_g2.push_back(ix[a] * knots + iy[b]);
                geo.combo_w.push_back(w);
            }
        }
        geo.combo_ptr[e + 1] = static_cast<int>(geo.combo_g2.size());
    }
    return geo;
}

ParamVars ParamVars::bind(Tape& tape, const ParamStore& store, const EncoderConfig& config,
                          bool with_grad) {
    auto take = [&](const std::string& name) {
        return with_grad ? tape.param(store, name) : tape.leaf(store.at(name), false);
    };
    ParamVars p;
    p.input_w = take("encoder.input.weight");
    p.input_b = take("encoder.input.bias");
    for (int l = 0; l < config.spline_layers_2d; ++l)
        p.conv2d.push_back({take(conv_name("conv2d", l, "kernel")),
                            take(conv_name("conv2d", l, "root")),
                            take(conv_name("conv2d", l, "bias"))});
    p.mlp_w1 = take("encoder.mlp_z.w1");
    p.mlp_b1 = take("encoder.mlp_z.b1");
    p.mlp_w2 = take("encoder.mlp_z.w2");
    p.mlp_b2 = take("encoder.mlp_z.b2");
    for (int l = 0; l < config.spline_layers_3d; ++l)
        p.conv3d.push_back({take(conv_name("conv3d", l, "kernel")),
                            take(conv_name("conv3d", l, "root")),
                            take(conv_name("conv3d", l, "bias"))});
    p.universe = take("universe.embedding");
    return p;
}

Var spline_conv(Tape& tape, std::shared_ptr<const SplineGeometry> geo, Var x, Var kernel, Var root,
                Var bias, std::optional<Var> z, const DropoutSampler& dropout,
                double dropout_rate) {
    const Tensor& X = x.value();
    const Tensor& K = kernel.value();
    const Tensor& R = root.value();
    const Tensor& B = bias.value();
    const int knots = geo->knots;
    const std::int64_t m = X.dim(0), hi = X.dim(1), ho = R.dim(1);
    const std::int64_t expected_g =
        z ? static_cast<std::int64_t>(knots) * knots * knots : static_cast<std::int64_t>(knots) * knots;
    if (X.rank() != 2 || m != geo->node_count)
        throw ValidationError("spline_conv: feature row count mismatch");
    if (K.rank() != 3 || K.dim(0) != expected_g || K.dim(1) != hi || K.dim(2) != ho)
        throw ValidationError("spline_conv: kernel shape mismatch");
    if (R.rank() != 2 || R.dim(0) != hi) throw ValidationError("spline_conv: root shape mismatch");
    if (B.rank() != 2 || B.dim(0) != 1 || B.dim(1) != ho)
        throw ValidationError("spline_conv: bias shape mismatch");
    if (z && (z->value().dim(0) != m || z->value().dim(1) != 1))
        throw ValidationError("spline_conv: z shape mismatch");

    const bool three_d = z.has_value();
    const double* zv = three_d ? z->value().data() : nullptr;

    Tensor out({m, ho});
    acc_mm_nn(X.data(), R.data(), out.data(), m, hi, ho);
    for (std::int64_t v = 0; v < m; ++v)
        for (std::int64_t j = 0; j < ho; ++j) out.at(v, j) += B[j];

    // Accumulates coeff * x_row * Theta_g into dst.
    auto apply_kernel = [&](const double* kern, int g, double coeff, const double* x_row,
                            double* dst) {
        const double* block = kern + static_cast<std::int64_t>(g) * hi * ho;
        for (std::int64_t i = 0; i < hi; ++i) {
            const double a = coeff * x_row[i];
            if (a == 0.0) continue;
            const double* krow = block + i * ho;
            for (std::int64_t j = 0; j < ho; ++j) dst[j] += a * krow[j];
        }
    };

    for (std::int64_t v = 0; v < m; ++v) {
        const double inv_deg = geo->inv_degree[static_cast<std::size_t>(v)];
        double* orow = out.data() + v * ho;
        for (int e = geo->row_ptr[static_cast<std::size_t>(v)];
             e < geo->row_ptr[static_cast<std::size_t>(v) + 1]; ++e) {
            const int w = geo->neighbor[static_cast<std::size_t>(e)];
            const double* xw = X.data() + static_cast<std::int64_t>(w) * hi;
            if (!three_d) {
                for (int c = geo->combo_ptr[static_cast<std::size_t>(e)];
                     c < geo->combo_ptr[static_cast<std::size_t>(e) + 1]; ++c)
                    apply_kernel(K.data(), geo->combo_g2[static_cast<std::size_t>(c)],
                                 geo->combo_w[static_cast<std::size_t>(c)] * inv_deg, xw, orow);
            } else {
                const double uz = clamp01((zv[w] - zv[v]) * geo->inv_2r + 0.5);
                int iz[2];
                double wz[2];
                const int nz = hat_active(uz, knots, iz, wz);
                for (int c = geo->combo_ptr[static_cast<std::size_t>(e)];
                     c < geo->combo_ptr[static_cast<std::size_t>(e) + 1]; ++c) {
                    const int g2 = geo->combo_g2[static_cast<std::size_t>(c)];
                    const double wxy = geo->combo_w[static_cast<std::size_t>(c)];
                    for (int a = 0; a < nz; ++a) {
                        const double coeff = wxy * wz[a] * inv_deg;
                        if (coeff == 0.0) continue;
                        apply_kernel(K.data(), g2 * knots + iz[a], coeff, xw, orow);
                    }
                }
            }
        }
    }

    std::vector<Var> parents{x, kernel, root, bias};
    if (three_d) parents.push_back(*z);
    const int xid = x.id, kid = kernel.id, rid = root.id, bid = bias.id;
    const int zid = three_d ? z->id : -1;

    Var linear = tape.custom(
        std::move(out), parents,
        [geo, xid, kid, rid, bid, zid, m, hi, ho, knots, three_d](Tape& t, int self) {
            const Tensor& G = t.grad_at(self);
            const Tensor& X2 = t.value_at(xid);
            const Tensor& K2 = t.value_at(kid);
            const double* zv2 = three_d ? t.value_at(zid).data() : nullptr;

            if (t.wants_grad(rid)) {
                // droot += X^T G
                Tensor& dr = t.grad_accum(rid);
                for (std::int64_t v = 0; v < m; ++v) {
                    const double* xrow = X2.data() + v * hi;
                    const double* grow = G.data() + v * ho;
                    for (std::int64_t i = 0; i < hi; ++i) {
                        const double a = xrow[i];
                        if (a == 0.0) continue;
                        double* drow = dr.data() + i * ho;
                        for (std::int64_t j = 0; j < ho; ++j) drow[j] += a * grow[j];
                    }
                }
            }
            if (t.wants_grad(bid)) {
                Tensor& db = t.grad_accum(bid);
                for (std::int64_t v = 0; v < m; ++v)
                    for (std::int64_t j = 0; j < ho; ++j) db[j] += G.at(v, j);
            }
            if (t.wants_grad(xid)) {
                // dx += G root^T
                Tensor& dx = t.grad_accum(xid);
                const Tensor& R2 = t.value_at(rid);
                for (std::int64_t v = 0; v < m; ++v) {
                    const double* grow = G.data() + v * ho;
                    double* dxrow = dx.data() + v * hi;
                    for (std::int64_t i = 0; i < hi; ++i) {
                        const double* rrow = R2.data() + i * ho;
                        double acc = 0.0;
                        for (std::int64_t j = 0; j < ho; ++j) acc += grow[j] * rrow[j];
                        dxrow[i] += acc;
                    }
                }
            }

            const bool want_x = t.wants_grad(xid);
            const bool want_k = t.wants_grad(kid);
            const bool want_z = three_d && t.wants_grad(zid);
            if (!want_x && !want_k && !want_z) return;

            Tensor* dx = want_x ? &t.grad_accum(xid) : nullptr;
            Tensor* dk = want_k ? &t.grad_accum(kid) : nullptr;
            Tensor* dz = want_z ? &t.grad_accum(zid) : nullptr;

            auto message_backward = [&](std::int64_t v, int w, int g, double coeff,
                                        const double* grow) {
                const double* xw = X2.data() + static_cast<std::int64_t>(w) * hi;
                const double* block = K2.data() + static_cast<std::int64_t>(g) * hi * ho;
                if (want_x) {
                    double* dxw = dx->data() + static_cast<std::int64_t>(w) * hi;
                    for (std::int64_t i = 0; i < hi; ++i) {
                        const double* krow = block + i * ho;
                        double acc = 0.0;
                        for (std::int64_t j = 0; j < ho; ++j) acc += grow[j] * krow[j];
                        dxw[i] += coeff * acc;
                    }
                }
                if (want_k) {
                    double* dkb = dk->data() + static_cast<std::int64_t>(g) * hi * ho;
                    for (std::int64_t i = 0; i < hi; ++i) {
                        const double a = coeff * xw[i];
                        if (a == 0.0) continue;
                        double* drow = dkb + i * ho;
                        for (std::int64_t j = 0; j < ho; ++j) drow[j] += a * grow[j];
                    }
                }
                (void)v;
            };

            // x^T Theta_g G^T contraction for the z-derivative.
            auto bilinear = [&](int w, int g, const double* grow) {
                const double* xw = X2.data() + static_cast<std::int64_t>(w) * hi;
                const double* block = K2.data() + static_cast<std::int64_t>(g) * hi * ho;
                double acc = 0.0;
                for (std::int64_t i = 0; i < hi; ++i) {
                    const double a = xw[i];
                    if (a == 0.0) continue;
                    const double* krow = block + i * ho;
                    double dot = 0.0;
                    for (std::int64_t j = 0; j < ho; ++j) dot += krow[j] * grow[j];
                    acc += a * dot;
                }
                return acc;
            };

            for (std::int64_t v = 0; v < m; ++v) {
                const double inv_deg = geo->inv_degree[static_cast<std::size_t>(v)];
                const double* grow = G.data() + v * ho;
                for (int e = geo->row_ptr[static_cast<std::size_t>(v)];
                     e < geo->row_ptr[static_cast<std::size_t>(v) + 1]; ++e) {
                    const int w = geo->neighbor[static_cast<std::size_t>(e)];
                    if (!three_d) {
                        for (int c = geo->combo_ptr[static_cast<std::size_t>(e)];
                             c < geo->combo_ptr[static_cast<std::size_t>(e) + 1]; ++c)
                            message_backward(v, w, geo->combo_g2[static_cast<std::size_t>(c)],
                                             geo->combo_w[static_cast<std::size_t>(c)] * inv_deg,
                                             grow);
                        continue;
                    }
                    const double pre = (zv2[w] - zv2[v]) * geo->inv_2r + 0.5;
                    const double uz = clamp01(pre);
                    int iz[2];
                    double wz[2];
                    const int nz = hat_active(uz, knots, iz, wz);
                    double z_scalar = 0.0;
                    const bool inside = pre > 0.0 && pre < 1.0 && nz == 2;
                    for (int c = geo->combo_ptr[static_cast<std::size_t>(e)];
                         c < geo->combo_ptr[static_cast<std::size_t>(e) + 1]; ++c) {
                        const int g2 = geo->combo_g2[static_cast<std::size_t>(c)];
                        const double wxy = geo->combo_w[static_cast<std::size_t>(c)];
                        for (int a = 0; a < nz; ++a) {
                            const int g = g2 * knots + iz[a];
                            const double coeff = wxy * wz[a] * inv_deg;
                            if (coeff != 0.0 && (want_x || want_k))
                                message_backward(v, w, g, coeff, grow);
                            if (want_z && inside) {
                                const double dwz = (a == 0 ? -1.0 : 1.0) * (knots - 1);
                                z_scalar += wxy * dwz * inv_deg * bilinear(w, g, grow);
                            }
                        }
                    }
                    if (want_z && inside) {
                        const double s = z_scalar * geo->inv_2r;
                        (*dz)[w] += s;
                        (*dz)[v] -= s;
                    }
                }
            }
        });

    Var activated = tape.relu(linear);
    if (dropout && dropout_rate > 0.0) {
        Tensor mask = dropout(activated.value().shape());
        activated = tape.dropout(activated, mask, dropout_rate);
    }
    return activated;
}

Var lift_virtual_coordinate(Tape& tape, const ParamVars& params, Var features) {
    Var hidden = tape.relu(tape.add_rowvec(tape.matmul(features, params.mlp_w1), params.mlp_b1));
    return tape.add_rowvec(tape.matmul(hidden, params.mlp_w2), params.mlp_b2);
}

EncodeVars encode_on_tape(Tape& tape, const ParamVars& params, const EncoderConfig& config,
                          const Graph& graph, const DropoutSampler& dropout) {
    if (graph.feature_dim() != config.input_dim)
        throw ValidationError("encode: graph feature dimension does not match the encoder");
    auto geo = std::make_shared<const SplineGeometry>(
        SplineGeometry::build(graph, config.kernel_knots));

    Var input = tape.leaf(graph.features, false);
    Var x = tape.add_rowvec(tape.matmul(input, params.input_w), params.input_b);
    for (const auto& layer : params.conv2d)
        x = spline_conv(tape, geo, x, layer.kernel, layer.root, layer.bias, std::nullopt, dropout,
                        config.dropout_rate);
    Var z = lift_virtual_coordinate(tape, params, x);
    for (const auto& layer : params.conv3d)
        x = spline_conv(tape, geo, x, layer.kernel, layer.root, layer.bias, z, dropout,
                        config.dropout_rate);
    return {x, z};
}

Var soft_matching_on_tape(Tape& tape, Var features, Var universe) {
    if (features.value().dim(0) > universe.value().dim(0))
        throw ValidationError("soft matching: infeasible graph (more nodes than universe points)");
    if (features.value().dim(1) != universe.value().dim(1))
        throw ValidationError("soft matching: embedding width mismatch");
    return tape.row_softmax(tape.matmul(features, tape.transpose(universe)));
}

namespace {

Tensor smoothed_targets(const UniverseMatching& gt, double label_smoothing) {
    const std::int64_t m = gt.rows();
    const std::int64_t d = gt.universe_size();
    Tensor y({m, d}, label_smoothing / static_cast<double>(d));
    for (std::int64_t v = 0; v < m; ++v)
        y.at(v, gt.column_of(static_cast<int>(v))) += 1.0 - label_smoothing;
    return y;
}

constexpr double kLogFloor = 1e-12;

}  // namespace

Var node_loss_on_tape(Tape& tape, Var soft, const UniverseMatching& gt, double label_smoothing) {
    const Tensor& S = soft.value();
    if (S.dim(0) != gt.rows() || S.dim(1) != gt.universe_size())
        throw ValidationError("node loss: shape mismatch");
    Var targets = tape.leaf(smoothed_targets(gt, label_smoothing), false);
    Var ce = tape.sum(tape.mul(targets, tape.log_clamped(soft, kLogFloor)));
    return tape.scale(ce, -1.0 / static_cast<double>(gt.rows()));
}

Var total_loss_on_tape(Tape& tape, const ParamVars& params, const EncoderConfig& config,
                       const std::vector<const Graph*>& batch, const DropoutSampler& dropout,
                       std::vector<Tensor>* soft_out) {
    if (batch.empty()) throw ValidationError("total loss: empty batch");
    std::optional<Var> total;
    for (const Graph* graph : batch) {
        if (!graph->labels)
            throw ValidationError("total loss: graph is missing ground-truth labels");
        EncodeVars enc = encode_on_tape(tape, params, config, *graph, dropout);
        Var soft = soft_matching_on_tape(tape, enc.features, params.universe);
        if (soft_out != nullptr) soft_out->push_back(soft.value());
        UniverseMatching gt(config.universe_size, *graph->labels);
        Var loss = node_loss_on_tape(tape, soft, gt, config.label_smoothing);
        total = total ? tape.add(*total, loss) : loss;
    }
    return *total;
}

EncodeResult encode(const ParamStore& store, const EncoderConfig& config, const Graph& graph) {
    Tape tape;
    ParamVars params = ParamVars::bind(tape, store, config, false);
    EncodeVars enc = encode_on_tape(tape, params, config, graph, nullptr);
    EncodeResult out;
    out.features = enc.features.value();
    const Tensor& z = enc.lifted_z.value();
    out.lifted_z.assign(z.data(), z.data() + z.size());
    return out;
}

SoftMatching soft_matching(const Tensor& features, const Tensor& universe) {
    if (features.rank() != 2 || universe.rank() != 2 || features.dim(1) != universe.dim(1))
        throw ValidationError("soft matching: embedding width mismatch");
    if (features.dim(0) > universe.dim(0))
        throw ValidationError("soft matching: infeasible graph (more nodes than universe points)");
    const std::int64_t m = features.dim(0), d = universe.dim(0), h = features.dim(1);
    Tensor s({m, d});
    for (std::int64_t v = 0; v < m; ++v)
        for (std::int64_t u = 0; u < d; ++u) {
            double dot = 0.0;
            for (std::int64_t i = 0; i < h; ++i) dot += features.at(v, i) * universe.at(u, i);
            s.at(v, u) = dot;
        }
    for (std::int64_t v = 0; v < m; ++v) {
        double mx = s.at(v, 0);
        for (std::int64_t u = 1; u < d; ++u) mx = std::max(mx, s.at(v, u));
        double zsum = 0.0;
        for (std::int64_t u = 0; u < d; ++u) {
            s.at(v, u) = std::exp(s.at(v, u) - mx);
            zsum += s.at(v, u);
        }
        for (std::int64_t u = 0; u < d; ++u) s.at(v, u) /= zsum;
    }
    return SoftMatching(std::move(s));
}

double node_loss(const SoftMatching& soft, const UniverseMatching& gt, double label_smoothing) {
    if (soft.rows() != gt.rows() || soft.universe_size() != gt.universe_size())
        throw ValidationError("node loss: shape mismatch");
    const Tensor y = smoothed_targets(gt, label_smoothing);
    double total = 0.0;
    for (std::int64_t v = 0; v < soft.values.dim(0); ++v)
        for (std::int64_t j = 0; j < soft.values.dim(1); ++j)
            total -= y.at(v, j) * std::log(std::max(soft.values.at(v, j), kLogFloor));
    return total / static_cast<double>(gt.rows());
}

UniverseMatching discretize(const SoftMatching& soft) {
    ScoreMatrix scores(soft.rows(), soft.universe_size(), soft.values.values());
    return solve_lap_auction(scores).matching;
}

Tensor centroid_universe(const std::vector<Tensor>& encoded,
                         const std::vector<UniverseMatching>& gt, int universe_size,
                         CentroidMode mode) {
    if (encoded.size() != gt.size() || encoded.empty())
        throw ValidationError("centroid universe: feature/matching count mismatch");
    const std::int64_t h = encoded.front().dim(1);
    Tensor u({universe_size, h});
    std::vector<std::int64_t> occurrences(static_cast<std::size_t>(universe_size), 0);
    for (std::size_t i = 0; i < encoded.size(); ++i) {
        const Tensor& f = encoded[i];
        if (f.rank() != 2 || f.dim(1) != h)
            throw ValidationError("centroid universe: embedding width mismatch");
        if (f.dim(0) != gt[i].rows())
            throw ValidationError("centroid universe: feature/matching row mismatch");
        for (int v = 0; v < gt[i].rows(); ++v) {
            const int col = gt[i].column_of(v);
            if (col >= universe_size)
                throw ValidationError("centroid universe: label outside universe");
            ++occurrences[static_cast<std::size_t>(col)];
            for (std::int64_t j = 0; j < h; ++j) u.at(col, j) += f.at(v, j);
        }
    }
    if (mode == CentroidMode::kPaper) {
        const double inv_k = 1.0 / static_cast<double>(encoded.size());
        for (std::int64_t i = 0; i < u.size(); ++i) u[i] *= inv_k;
    } else {
        for (int c = 0; c < universe_size; ++c) {
            if (occurrences[static_cast<std::size_t>(c)] == 0) continue;
            const double inv = 1.0 / static_cast<double>(occurrences[static_cast<std::size_t>(c)]);
            for (std::int64_t j = 0; j < h; ++j) u.at(c, j) *= inv;
        }
    }
    return u;
}

PartialPermutation MatchResult::pairwise(int i, int j) const {
    return pairwise_from_universe(hard[static_cast<std::size_t>(i)],
                                  hard[static_cast<std::size_t>(j)]);
}

MatchingCollection MatchResult::collection() const { return MatchingCollection::from_universe(hard); }

MatchResult match_collection(const ParamStore& store, const EncoderConfig& config,
                             const std::vector<Graph>& graphs) {
    MatchResult result;
    result.universe_size = config.universe_size;
    const Tensor& universe = store.at("universe.embedding");
    for (const Graph& graph : graphs) {
        EncodeResult enc = encode(store, config, graph);
        SoftMatching soft = soft_matching(enc.features, universe);
        result.hard.push_back(discretize(soft));
        result.soft.push_back(std::move(soft));
        result.lifted_z.push_back(std::move(enc.lifted_z));
    }
    return result;
}

ParamStore init_params(const EncoderConfig& config, std::uint64_t seed) {
    config.validate();
    const std::int64_t f = config.input_dim;
    const std::int64_t h = config.hidden_dim;
    const std::int64_t zh = config.mlp_z_hidden;
    const std::int64_t k = config.kernel_knots;
    const std::int64_t d = config.universe_size;

    auto gaussian_tensor = [](std::vector<std::int64_t> shape, double stddev, Rng& rng) {
        Tensor t(std::move(shape));
        for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.gaussian(0.0, stddev);
        return t;
    };

    // Scales chosen so encoder outputs stay near unit RMS: the universe
    // embeddings start at std 1/sqrt(h), so unit features give unit-scale
    // matching logits and the row softmax starts unsaturated.
    ParamStore store;
    {
        Rng rng = Rng::stream(seed, 0);
        store.insert("encoder.input.weight",
                     gaussian_tensor({f, h}, std::sqrt(1.0 / static_cast<double>(f)), rng));
        store.insert("encoder.input.bias", Tensor({1, h}));
    }
    const double conv_std = std::sqrt(1.0 / static_cast<double>(h));
    for (int l = 0; l < config.spline_layers_2d; ++l) {
        Rng rng = Rng::stream(seed, 10 + static_cast<std::uint64_t>(l));
        store.insert(conv_name("conv2d", l, "kernel"),
                     gaussian_tensor({k * k, h, h}, conv_std, rng));
        store.insert(conv_name("conv2d", l, "root"), gaussian_tensor({h, h}, conv_std, rng));
        store.insert(conv_name("conv2d", l, "bias"), Tensor({1, h}));
    }
    {
        Rng rng = Rng::stream(seed, 1);
        store.insert("encoder.mlp_z.w1",
                     gaussian_tensor({h, zh}, std::sqrt(2.0 / static_cast<double>(h)), rng));
        store.insert("encoder.mlp_z.b1", Tensor({1, zh}));
        store.insert("encoder.mlp_z.w2",
                     gaussian_tensor({zh, 1}, std::sqrt(2.0 / static_cast<double>(zh)), rng));
        store.insert("encoder.mlp_z.b2", Tensor({1, 1}));
    }
    for (int l = 0; l < config.spline_layers_3d; ++l) {
        Rng rng = Rng::stream(seed, 40 + static_cast<std::uint64_t>(l));
        store.insert(conv_name("conv3d", l, "kernel"),
                     gaussian_tensor({k * k * k, h, h}, conv_std, rng));
        store.insert(conv_name("conv3d", l, "root"), gaussian_tensor({h, h}, conv_std, rng));
        store.insert(conv_name("conv3d", l, "bias"), Tensor({1, h}));
    }
    {
        Rng rng = Rng::stream(seed, 2);
        store.insert("universe.embedding",
                     gaussian_tensor({d, h}, 1.0 / std::sqrt(static_cast<double>(h)), rng));
    }
    return store;
}

EncoderConfig config_from_params(const ParamStore& store) {
    EncoderConfig config;
    const Tensor& input_w = store.at("encoder.input.weight");
    if (input_w.rank() != 2) throw ValidationError("checkpoint: malformed input projection");
    config.input_dim = static_cast<int>(input_w.dim(0));
    config.hidden_dim = static_cast<int>(input_w.dim(1));

    int layers_2d = 0;
    while (store.contains(conv_name("conv2d", layers_2d, "kernel"))) ++layers_2d;
    int layers_3d = 0;
    while (store.contains(conv_name("conv3d", layers_3d, "kernel"))) ++layers_3d;
    config.spline_layers_2d = layers_2d;
    config.spline_layers_3d = layers_3d;

    if (layers_2d > 0) {
        const std::int64_t g = store.at(conv_name("conv2d", 0, "kernel")).dim(0);
        const int k = static_cast<int>(std::llround(std::sqrt(static_cast<double>(g))));
        if (static_cast<std::int64_t>(k) * k != g)
            throw ValidationError("checkpoint: 2D kernel size is not a square");
        config.kernel_knots = k;
    } else if (layers_3d > 0) {
        const std::int64_t g = store.at(conv_name("conv3d", 0, "kernel")).dim(0);
        const int k = static_cast<int>(std::llround(std::cbrt(static_cast<double>(g))));
        if (static_cast<std::int64_t>(k) * k * k != g)
            throw ValidationError("checkpoint: 3D kernel size is not a cube");
        config.kernel_knots = k;
    }
    if (layers_3d > 0 && layers_2d > 0) {
        const std::int64_t g3 = store.at(conv_name("conv3d", 0, "kernel")).dim(0);
        const std::int64_t k = config.kernel_knots;
        if (g3 != k * k * k)
            throw ValidationError("checkpoint: 2D and 3D kernels disagree on knot count");
    }

    config.mlp_z_hidden = static_cast<int>(store.at("encoder.mlp_z.w1").dim(1));
    config.universe_size = static_cast<int>(store.at("universe.embedding").dim(0));
    config.validate();
    return config;
}

}  // namespace url
