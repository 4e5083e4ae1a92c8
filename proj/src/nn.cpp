#include "graphdistill/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>

#include "graphdistill/errors.hpp"
#include "graphdistill/rng.hpp"

namespace gd::nn {

TaskSpec TaskSpec::regression(std::string name, double weight) {
    TaskSpec t;
    t.name = std::move(name);
    t.kind = TaskKind::kRegression;
    t.num_classes = 0;
    t.weight = weight;
    return t;
}

TaskSpec TaskSpec::classification(std::string name, int num_classes, double weight) {
    TaskSpec t;
    t.name = std::move(name);
    t.kind = TaskKind::kClassification;
    t.num_classes = num_classes;
    t.weight = weight;
    return t;
}

void validate_tasks(const std::vector<TaskSpec>& tasks) {
    if (tasks.empty()) throw std::invalid_argument("at least one task required");
    bool any_positive = false;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const TaskSpec& t = tasks[i];
        if (t.name.empty()) throw std::invalid_argument("task name must be non-empty");
        if (!(t.weight >= 0.0) || !std::isfinite(t.weight))
            throw std::invalid_argument("task weight must be finite and >= 0: " + t.name);
        if (t.weight > 0.0) any_positive = true;
        if (t.kind == TaskKind::kClassification && t.num_classes < 2)
            throw std::invalid_argument("classification task needs >= 2 classes: " + t.name);
        if (t.kind == TaskKind::kRegression && t.num_classes != 0)
            throw std::invalid_argument("regression task must not set num_classes: " + t.name);
        for (std::size_t j = i + 1; j < tasks.size(); ++j)
            if (tasks[j].name == t.name)
                throw std::invalid_argument("duplicate task name: " + t.name);
    }
    if (!any_positive) throw std::invalid_argument("at least one task weight must be positive");
}

void NetConfig::validate() const {
    auto check_kernel = [](int k) {
        if (k != 3 && k != 5 && k != 7)
            throw std::invalid_argument("kernel size must be 3, 5, or 7");
    };
    check_kernel(conv1.kernel);
    check_kernel(conv2.kernel);
    if (conv1.filters < 1 || conv2.filters < 1)
        throw std::invalid_argument("filter counts must be >= 1");
    if (input_bins < 1 || input_steps < 1)
        throw std::invalid_argument("input plane dimensions must be >= 1");
    if (fc_shared_units < 1 || head_units < 1)
        throw std::invalid_argument("layer widths must be >= 1");
    if (conv1_h() < 1 || conv1_w() < 1 || conv2_h() < 1 || conv2_w() < 1)
        throw std::invalid_argument("input plane too small for the configured kernels");
    validate_tasks(tasks);
}

bool shapes_feasible(int bins, int steps, int kernel) {
    int h1 = bins - kernel + 1;
    int w1 = steps - kernel + 1;
    if (h1 < 1 || w1 < 1) return false;
    return pooled_dim(h1) - kernel + 1 >= 1 && pooled_dim(w1) - kernel + 1 >= 1;
}

MultiTaskNet::MultiTaskNet(NetConfig config) : cfg(std::move(config)) {
    cfg.validate();
    Rng rng(mix_seed(cfg.rng_seed, 0));
    auto add = [&](const std::string& name, std::vector<int> shape, int fan_in, int fan_out) {
        Param p;
        p.name = name;
        p.value = Tensor(shape);
        p.m = Tensor(shape);
        p.v = Tensor(std::move(shape));
        if (fan_in > 0) {
            double limit = std::sqrt(6.0 / (fan_in + fan_out));
            for (double& x : p.value.v) x = rng.uniform(-limit, limit);
        }
        params.push_back(std::move(p));
    };
    int k1 = cfg.conv1.kernel, f1 = cfg.conv1.filters;
    int k2 = cfg.conv2.kernel, f2 = cfg.conv2.filters;
    add("conv1.weight", {f1, 1, k1, k1}, k1 * k1, f1 * k1 * k1);
    add("conv1.bias", {f1}, 0, 0);
    add("conv2.weight", {f2, f1, k2, k2}, f1 * k2 * k2, f2 * k2 * k2);
    add("conv2.bias", {f2}, 0, 0);
    add("fc.weight", {cfg.fc_shared_units, cfg.flat_dim()}, cfg.flat_dim(), cfg.fc_shared_units);
    add("fc.bias", {cfg.fc_shared_units}, 0, 0);
    for (const TaskSpec& t : cfg.tasks) {
        int d = t.output_dim();
        add("head." + t.name + ".weight", {cfg.head_units, cfg.fc_shared_units},
            cfg.fc_shared_units, cfg.head_units);
        add("head." + t.name + ".bias", {cfg.head_units}, 0, 0);
        add("out." + t.name + ".weight", {d, cfg.head_units}, cfg.head_units, d);
        add("out." + t.name + ".bias", {d}, 0, 0);
    }
    stats.assign(cfg.tasks.size(), TaskStats{});
}

namespace {

void ensure(Tensor& t, std::vector<int> shape) {
    if (t.shape != shape) t = Tensor(std::move(shape));
}

void conv_forward(const Tensor& in, const Tensor& w, const Tensor& b, Tensor& out) {
    int n_count = in.shape[0], chans = in.shape[1], h = in.shape[2], wd = in.shape[3];
    int filters = w.shape[0], k = w.shape[2];
    int oh = h - k + 1, ow = wd - k + 1;
    ensure(out, {n_count, filters, oh, ow});
    const double* ip = in.data();
    const double* wp = w.data();
    double* op = out.data();
    for (int n = 0; n < n_count; ++n) {
        for (int f = 0; f < filters; ++f) {
            double* plane = op + (static_cast<std::size_t>(n) * filters + f) * oh * ow;
            std::fill(plane, plane + static_cast<std::size_t>(oh) * ow, b.v[f]);
            for (int c = 0; c < chans; ++c) {
                const double* inc = ip + (static_cast<std::size_t>(n) * chans + c) * h * wd;
                const double* wf = wp + (static_cast<std::size_t>(f) * chans + c) * k * k;
                for (int ki = 0; ki < k; ++ki) {
                    for (int kj = 0; kj < k; ++kj) {
                        double wv = wf[ki * k + kj];
                        for (int r = 0; r < oh; ++r) {
                            const double* irow = inc + static_cast<std::size_t>(r + ki) * wd + kj;
                            double* orow = plane + static_cast<std::size_t>(r) * ow;
                            for (int cidx = 0; cidx < ow; ++cidx) orow[cidx] += wv * irow[cidx];
                        }
                    }
                }
            }
        }
    }
}

void relu_forward(const Tensor& pre, Tensor& act) {
    ensure(act, pre.shape);
    for (std::size_t i = 0; i < pre.size(); ++i) act.v[i] = pre.v[i] > 0.0 ? pre.v[i] : 0.0;
}

void pool_forward(const Tensor& in, Tensor& out, std::vector<int>& arg) {
    int n_count = in.shape[0], chans = in.shape[1], h = in.shape[2], wd = in.shape[3];
    int ph = pooled_dim(h), pw = pooled_dim(wd);
    ensure(out, {n_count, chans, ph, pw});
    arg.resize(out.size());
    const double* ip = in.data();
    double* op = out.data();
    std::size_t oi = 0;
    for (int n = 0; n < n_count; ++n) {
        for (int c = 0; c < chans; ++c) {
            std::size_t base = (static_cast<std::size_t>(n) * chans + c) * h * wd;
            for (int r = 0; r < ph; ++r) {
                int r0 = 2 * r, r1 = std::min(r0 + 2, h);
                for (int q = 0; q < pw; ++q) {
                    int c0 = 2 * q, c1 = std::min(c0 + 2, wd);
                    std::size_t best_idx = base + static_cast<std::size_t>(r0) * wd + c0;
                    double best = ip[best_idx];
                    for (int rr = r0; rr < r1; ++rr) {
                        for (int cc = c0; cc < c1; ++cc) {
                            std::size_t idx = base + static_cast<std::size_t>(rr) * wd + cc;
                            if (ip[idx] > best) {
                                best = ip[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    op[oi] = best;
                    arg[oi] = static_cast<int>(best_idx);
                    ++oi;
                }
            }
        }
    }
}

void dense_forward(const double* in, int n_count, int in_dim, const Tensor& w, const Tensor& b,
                   Tensor& out) {
    int out_dim = w.shape[0];
    ensure(out, {n_count, out_dim});
    const double* wp = w.data();
    double* op = out.data();
    for (int n = 0; n < n_count; ++n) {
        const double* row = in + static_cast<std::size_t>(n) * in_dim;
        for (int o = 0; o < out_dim; ++o) {
            const double* wr = wp + static_cast<std::size_t>(o) * in_dim;
            double sum = b.v[o];
            for (int i = 0; i < in_dim; ++i) sum += wr[i] * row[i];
            op[static_cast<std::size_t>(n) * out_dim + o] = sum;
        }
    }
}

// dW += dout^T x in, db += column sums of dout, din (+)= dout x W
void dense_backward(const double* in, const double* dout, int n_count, int in_dim, int out_dim,
                    const Tensor& w, Tensor& dw, Tensor& db, double* din, bool accumulate_din) {
    const double* wp = w.data();
    for (int n = 0; n < n_count; ++n) {
        const double* drow = dout + static_cast<std::size_t>(n) * out_dim;
        const double* irow = in + static_cast<std::size_t>(n) * in_dim;
        double* din_row = din ? din + static_cast<std::size_t>(n) * in_dim : nullptr;
        if (din_row && !accumulate_din) std::fill(din_row, din_row + in_dim, 0.0);
        for (int o = 0; o < out_dim; ++o) {
            double g = drow[o];
            if (g == 0.0) continue;
            db.v[o] += g;
            double* dwr = dw.data() + static_cast<std::size_t>(o) * in_dim;
            const double* wr = wp + static_cast<std::size_t>(o) * in_dim;
            for (int i = 0; i < in_dim; ++i) {
                dwr[i] += g * irow[i];
                if (din_row) din_row[i] += g * wr[i];
            }
        }
    }
}

void conv_backward(const Tensor& in, const Tensor& w, const Tensor& dout, Tensor& dw, Tensor& db,
                   Tensor* din) {
    int n_count = in.shape[0], chans = in.shape[1], h = in.shape[2], wd = in.shape[3];
    int filters = w.shape[0], k = w.shape[2];
    int oh = dout.shape[2], ow = dout.shape[3];
    if (din) din->fill(0.0);
    const double* ip = in.data();
    const double* wp = w.data();
    const double* dp = dout.data();
    for (int n = 0; n < n_count; ++n) {
        for (int f = 0; f < filters; ++f) {
            const double* dplane = dp + (static_cast<std::size_t>(n) * filters + f) * oh * ow;
            double bsum = 0.0;
            for (std::size_t i = 0; i < static_cast<std::size_t>(oh) * ow; ++i) bsum += dplane[i];
            db.v[f] += bsum;
            for (int c = 0; c < chans; ++c) {
                const double* inc = ip + (static_cast<std::size_t>(n) * chans + c) * h * wd;
                double* dinc = din ? din->data() + (static_cast<std::size_t>(n) * chans + c) * h * wd
                                   : nullptr;
                const double* wf = wp + (static_cast<std::size_t>(f) * chans + c) * k * k;
                double* dwf = dw.data() + (static_cast<std::size_t>(f) * chans + c) * k * k;
                for (int ki = 0; ki < k; ++ki) {
                    for (int kj = 0; kj < k; ++kj) {
                        double wv = wf[ki * k + kj];
                        double wsum = 0.0;
                        for (int r = 0; r < oh; ++r) {
                            const double* irow = inc + static_cast<std::size_t>(r + ki) * wd + kj;
                            const double* drow = dplane + static_cast<std::size_t>(r) * ow;
                            if (dinc) {
                                double* dirow = dinc + static_cast<std::size_t>(r + ki) * wd + kj;
                                for (int cidx = 0; cidx < ow; ++cidx) {
                                    wsum += drow[cidx] * irow[cidx];
                                    dirow[cidx] += drow[cidx] * wv;
                                }
                            } else {
                                for (int cidx = 0; cidx < ow; ++cidx) wsum += drow[cidx] * irow[cidx];
                            }
                        }
                        dwf[ki * k + kj] += wsum;
                    }
                }
            }
        }
    }
}

void pool_backward(const Tensor& d_pooled, const std::vector<int>& arg, Tensor& d_in) {
    d_in.fill(0.0);
    for (std::size_t i = 0; i < d_pooled.size(); ++i)
        d_in.v[static_cast<std::size_t>(arg[i])] += d_pooled.v[i];
}

void relu_backward(const Tensor& pre, const Tensor& d_act, Tensor& d_pre) {
    ensure(d_pre, pre.shape);
    for (std::size_t i = 0; i < pre.size(); ++i)
        d_pre.v[i] = pre.v[i] > 0.0 ? d_act.v[i] : 0.0;
}

int class_label(double value, int num_classes) {
    int y = static_cast<int>(std::llround(value));
    if (y < 0 || y >= num_classes)
        throw std::invalid_argument("class label out of range");
    return y;
}

// Row softmax cross-entropy pieces; returns loss, optionally fills prob buffer.
double softmax_xent_row(const double* logits, int dim, int label, double* probs) {
    double mx = logits[0];
    for (int c = 1; c < dim; ++c) mx = std::max(mx, logits[c]);
    double sum = 0.0;
    for (int c = 0; c < dim; ++c) sum += std::exp(logits[c] - mx);
    if (probs)
        for (int c = 0; c < dim; ++c) probs[c] = std::exp(logits[c] - mx) / sum;
    return std::log(sum) - (logits[label] - mx);
}

} // namespace

void forward_cached(const MultiTaskNet& net, const Tensor& inputs, ForwardCache& cache) {
    const NetConfig& cfg = net.cfg;
    if (inputs.shape.size() != 4 || inputs.shape[1] != 1 || inputs.shape[2] != cfg.input_bins ||
        inputs.shape[3] != cfg.input_steps || inputs.shape[0] < 1)
        throw std::invalid_argument("input tensor must be [n, 1, bins, steps]");
    int n = inputs.shape[0];
    conv_forward(inputs, net.params[MultiTaskNet::kConv1W].value,
                 net.params[MultiTaskNet::kConv1B].value, cache.conv1_pre);
    relu_forward(cache.conv1_pre, cache.act1);
    pool_forward(cache.act1, cache.pool1, cache.pool1_arg);
    conv_forward(cache.pool1, net.params[MultiTaskNet::kConv2W].value,
                 net.params[MultiTaskNet::kConv2B].value, cache.conv2_pre);
    relu_forward(cache.conv2_pre, cache.act2);
    pool_forward(cache.act2, cache.pool2, cache.pool2_arg);
    dense_forward(cache.pool2.data(), n, cfg.flat_dim(), net.params[MultiTaskNet::kFcW].value,
                  net.params[MultiTaskNet::kFcB].value, cache.fc_pre);
    relu_forward(cache.fc_pre, cache.fc_act);
    std::size_t num_tasks = cfg.tasks.size();
    cache.head_pre.resize(num_tasks);
    cache.head_act.resize(num_tasks);
    cache.outputs.resize(num_tasks);
    for (std::size_t k = 0; k < num_tasks; ++k) {
        int base = net.head_base(static_cast<int>(k));
        dense_forward(cache.fc_act.data(), n, cfg.fc_shared_units, net.params[base].value,
                      net.params[base + 1].value, cache.head_pre[k]);
        relu_forward(cache.head_pre[k], cache.head_act[k]);
        dense_forward(cache.head_act[k].data(), n, cfg.head_units, net.params[base + 2].value,
                      net.params[base + 3].value, cache.outputs[k]);
    }
}

std::vector<Tensor> forward(const MultiTaskNet& net, const Tensor& inputs) {
    ForwardCache cache;
    forward_cached(net, inputs, cache);
    return std::move(cache.outputs);
}

double multitask_loss(const std::vector<Tensor>& outputs, const Batch& batch,
                      const std::vector<TaskSpec>& tasks) {
    if (outputs.size() != tasks.size() || batch.labels.size() != tasks.size())
        throw std::invalid_argument("outputs, labels, and tasks must align");
    int n = batch.size();
    bool any_labeled = false;
    double total = 0.0;
    for (std::size_t k = 0; k < tasks.size(); ++k) {
        const TaskLabels& lab = batch.labels[k];
        if (static_cast<int>(lab.values.size()) != n || static_cast<int>(lab.mask.size()) != n)
            throw std::invalid_argument("label arrays must match batch size");
        int m = 0;
        for (std::uint8_t b : lab.mask) m += b != 0;
        if (m == 0) continue;
        any_labeled = true;
        if (tasks[k].weight == 0.0) continue;
        const Tensor& out = outputs[k];
        int dim = tasks[k].output_dim();
        if (out.shape.size() != 2 || out.shape[0] != n || out.shape[1] != dim)
            throw std::invalid_argument("output tensor shape mismatch for task " + tasks[k].name);
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            if (!lab.mask[i]) continue;
            const double* row = out.data() + static_cast<std::size_t>(i) * dim;
            if (tasks[k].kind == TaskKind::kRegression) {
                double d = row[0] - lab.values[i];
                sum += d * d;
            } else {
                sum += softmax_xent_row(row, dim, class_label(lab.values[i], dim), nullptr);
            }
        }
        total += tasks[k].weight * (sum / m);
    }
    if (!any_labeled) throw std::invalid_argument("batch has no labeled examples for any task");
    return total;
}

double batch_loss(const MultiTaskNet& net, const Batch& batch) {
    return multitask_loss(forward(net, batch.inputs), batch, net.cfg.tasks);
}

void backward_into(const MultiTaskNet& net, const Batch& batch, ForwardCache& cache,
                   Gradients& grads) {
    const NetConfig& cfg = net.cfg;
    forward_cached(net, batch.inputs, cache);
    int n = batch.size();
    if (batch.labels.size() != cfg.tasks.size())
        throw std::invalid_argument("batch labels must align with net tasks");

    if (grads.tensors.size() != net.params.size()) {
        grads.tensors.clear();
        for (const Param& p : net.params) grads.tensors.emplace_back(p.value.shape);
    }
    for (Tensor& t : grads.tensors) t.fill(0.0);

    ensure(cache.d_fc_act, {n, cfg.fc_shared_units});
    cache.d_fc_act.fill(0.0);

    bool any_labeled = false;
    double total = 0.0;
    std::vector<double> probs;
    for (std::size_t k = 0; k < cfg.tasks.size(); ++k) {
        const TaskSpec& task = cfg.tasks[k];
        const TaskLabels& lab = batch.labels[k];
        if (static_cast<int>(lab.values.size()) != n || static_cast<int>(lab.mask.size()) != n)
            throw std::invalid_argument("label arrays must match batch size");
        int m = 0;
        for (std::uint8_t b : lab.mask) m += b != 0;
        if (m == 0) continue;
        any_labeled = true;
        if (task.weight == 0.0) continue;
        int dim = task.output_dim();
        const Tensor& out = cache.outputs[k];
        ensure(cache.d_out, {n, dim});
        cache.d_out.fill(0.0);
        double scale = task.weight / m;
        double sum = 0.0;
        probs.resize(static_cast<std::size_t>(dim));
        for (int i = 0; i < n; ++i) {
            if (!lab.mask[i]) continue;
            const double* row = out.data() + static_cast<std::size_t>(i) * dim;
            double* drow = cache.d_out.data() + static_cast<std::size_t>(i) * dim;
            if (task.kind == TaskKind::kRegression) {
                double d = row[0] - lab.values[i];
                sum += d * d;
                drow[0] = scale * 2.0 * d;
            } else {
                int y = class_label(lab.values[i], dim);
                sum += softmax_xent_row(row, dim, y, probs.data());
                for (int c = 0; c < dim; ++c)
                    drow[c] = scale * (probs[c] - (c == y ? 1.0 : 0.0));
            }
        }
        total += task.weight * (sum / m);

        int base = net.head_base(static_cast<int>(k));
        ensure(cache.d_head_pre, {n, cfg.head_units});
        // d_out -> out layer grads and d_head_act (reuse d_head_pre buffer)
        dense_backward(cache.head_act[k].data(), cache.d_out.data(), n, cfg.head_units, dim,
                       net.params[base + 2].value, grads.tensors[base + 2],
                       grads.tensors[base + 3], cache.d_head_pre.data(), false);
        relu_backward(cache.head_pre[k], cache.d_head_pre, cache.d_head_pre);
        dense_backward(cache.fc_act.data(), cache.d_head_pre.data(), n, cfg.fc_shared_units,
                       cfg.head_units, net.params[base].value, grads.tensors[base],
                       grads.tensors[base + 1], cache.d_fc_act.data(), true);
    }
    if (!any_labeled) throw std::invalid_argument("batch has no labeled examples for any task");
    grads.loss = total;

    relu_backward(cache.fc_pre, cache.d_fc_act, cache.d_fc_pre);
    ensure(cache.d_pool2, cache.pool2.shape);
    dense_backward(cache.pool2.data(), cache.d_fc_pre.data(), n, cfg.flat_dim(),
                   cfg.fc_shared_units, net.params[MultiTaskNet::kFcW].value,
                   grads.tensors[MultiTaskNet::kFcW], grads.tensors[MultiTaskNet::kFcB],
                   cache.d_pool2.data(), false);
    ensure(cache.d_act2, cache.act2.shape);
    pool_backward(cache.d_pool2, cache.pool2_arg, cache.d_act2);
    relu_backward(cache.conv2_pre, cache.d_act2, cache.d_act2);
    ensure(cache.d_pool1, cache.pool1.shape);
    conv_backward(cache.pool1, net.params[MultiTaskNet::kConv2W].value, cache.d_act2,
                  grads.tensors[MultiTaskNet::kConv2W], grads.tensors[MultiTaskNet::kConv2B],
                  &cache.d_pool1);
    ensure(cache.d_act1, cache.act1.shape);
    pool_backward(cache.d_pool1, cache.pool1_arg, cache.d_act1);
    relu_backward(cache.conv1_pre, cache.d_act1, cache.d_act1);
    conv_backward(batch.inputs, net.params[MultiTaskNet::kConv1W].value, cache.d_act1,
                  grads.tensors[MultiTaskNet::kConv1W], grads.tensors[MultiTaskNet::kConv1B],
                  nullptr);

    if (!std::isfinite(grads.loss)) throw NumericError("non-finite loss in backward pass");
    for (const Tensor& t : grads.tensors)
        for (double g : t.v)
            if (!std::isfinite(g)) throw NumericError("non-finite gradient in backward pass");
}

Gradients backward(const MultiTaskNet& net, const Batch& batch) {
    ForwardCache cache;
    Gradients grads;
    backward_into(net, batch, cache, grads);
    return grads;
}

void adam_step(MultiTaskNet& net, const Gradients& grads, const AdamConfig& adam) {
    if (grads.tensors.size() != net.params.size())
        throw std::invalid_argument("gradient count does not match parameter count");
    net.step_count += 1;
    double bc1 = 1.0 - std::pow(adam.beta1, static_cast<double>(net.step_count));
    double bc2 = 1.0 - std::pow(adam.beta2, static_cast<double>(net.step_count));
    for (std::size_t p = 0; p < net.params.size(); ++p) {
        Param& param = net.params[p];
        const Tensor& g = grads.tensors[p];
        if (g.shape != param.value.shape)
            throw std::invalid_argument("gradient shape mismatch for " + param.name);
        for (std::size_t i = 0; i < param.value.size(); ++i) {
            double gi = g.v[i];
            param.m.v[i] = adam.beta1 * param.m.v[i] + (1.0 - adam.beta1) * gi;
            param.v.v[i] = adam.beta2 * param.v.v[i] + (1.0 - adam.beta2) * gi * gi;
            double mhat = param.m.v[i] / bc1;
            double vhat = param.v.v[i] / bc2;
            param.value.v[i] -= adam.lr * mhat / (std::sqrt(vhat) + adam.eps);
        }
    }
}

namespace {

std::vector<TaskStats> label_statistics(const std::vector<TaskSpec>& tasks,
                                        const SampleSet& train_set) {
    std::vector<TaskStats> stats(tasks.size());
    for (std::size_t k = 0; k < tasks.size(); ++k) {
        if (tasks[k].kind != TaskKind::kRegression) continue;
        double sum = 0.0;
        std::size_t m = 0;
        for (const Sample& s : train_set) {
            auto it = s.labels.find(tasks[k].name);
            if (it == s.labels.end()) continue;
            sum += it->second;
            ++m;
        }
        if (m == 0) continue;
        double mean = sum / static_cast<double>(m);
        double sq = 0.0;
        for (const Sample& s : train_set) {
            auto it = s.labels.find(tasks[k].name);
            if (it == s.labels.end()) continue;
            double d = it->second - mean;
            sq += d * d;
        }
        double sd = std::sqrt(sq / static_cast<double>(m));
        stats[k].mean = mean;
        stats[k].stddev = sd > 1e-12 ? sd : 1.0;
    }
    return stats;
}

double standardized(const TaskSpec& task, const TaskStats& st, double raw) {
    if (task.kind == TaskKind::kRegression) return (raw - st.mean) / st.stddev;
    return raw;
}

void make_batch(const SampleSet& data, const std::vector<std::size_t>& order, std::size_t lo,
                std::size_t hi, const NetConfig& cfg, const std::vector<TaskStats>& stats,
                Batch& out) {
    int n = static_cast<int>(hi - lo);
    std::size_t plane = static_cast<std::size_t>(cfg.input_bins) * cfg.input_steps;
    ensure(out.inputs, {n, 1, cfg.input_bins, cfg.input_steps});
    out.labels.resize(cfg.tasks.size());
    for (std::size_t k = 0; k < cfg.tasks.size(); ++k) {
        out.labels[k].values.assign(static_cast<std::size_t>(n), 0.0);
        out.labels[k].mask.assign(static_cast<std::size_t>(n), 0);
    }
    for (std::size_t r = lo; r < hi; ++r) {
        const Sample& s = data[order[r]];
        if (s.input.size() != plane)
            throw std::invalid_argument("sample feature plane does not match net input shape");
        std::copy(s.input.v.begin(), s.input.v.end(),
                  out.inputs.v.begin() + static_cast<std::size_t>(r - lo) * plane);
        for (std::size_t k = 0; k < cfg.tasks.size(); ++k) {
            auto it = s.labels.find(cfg.tasks[k].name);
            if (it == s.labels.end()) continue;
            out.labels[k].values[r - lo] = standardized(cfg.tasks[k], stats[k], it->second);
            out.labels[k].mask[r - lo] = 1;
        }
    }
}

std::vector<std::size_t> identity_order(std::size_t n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    return idx;
}

} // namespace

double dataset_loss(const MultiTaskNet& net, const SampleSet& data, int batch_size) {
    if (data.empty()) throw std::invalid_argument("dataset loss needs at least one example");
    if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    const NetConfig& cfg = net.cfg;
    std::vector<double> sums(cfg.tasks.size(), 0.0);
    std::vector<std::size_t> counts(cfg.tasks.size(), 0);
    std::vector<std::size_t> order = identity_order(data.size());
    ForwardCache cache;
    Batch batch;
    for (std::size_t lo = 0; lo < data.size(); lo += static_cast<std::size_t>(batch_size)) {
        std::size_t hi = std::min(data.size(), lo + static_cast<std::size_t>(batch_size));
        make_batch(data, order, lo, hi, cfg, net.stats, batch);
        forward_cached(net, batch.inputs, cache);
        int n = batch.size();
        for (std::size_t k = 0; k < cfg.tasks.size(); ++k) {
            const TaskSpec& task = cfg.tasks[k];
            int dim = task.output_dim();
            for (int i = 0; i < n; ++i) {
                if (!batch.labels[k].mask[i]) continue;
                const double* row = cache.outputs[k].data() + static_cast<std::size_t>(i) * dim;
                if (task.kind == TaskKind::kRegression) {
                    double d = row[0] - batch.labels[k].values[i];
                    sums[k] += d * d;
                } else {
                    sums[k] += softmax_xent_row(row, dim,
                                                class_label(batch.labels[k].values[i], dim),
                                                nullptr);
                }
                ++counts[k];
            }
        }
    }
    bool any = false;
    double total = 0.0;
    for (std::size_t k = 0; k < cfg.tasks.size(); ++k) {
        if (counts[k] == 0) continue;
        any = true;
        total += cfg.tasks[k].weight * (sums[k] / static_cast<double>(counts[k]));
    }
    if (!any) throw std::invalid_argument("no labeled examples for any task");
    return total;
}

std::map<std::string, double> evaluate(const MultiTaskNet& net, const SampleSet& data,
                                       int batch_size) {
    if (data.empty()) throw std::invalid_argument("evaluation set must be non-empty");
    if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    const NetConfig& cfg = net.cfg;
    std::size_t plane = static_cast<std::size_t>(cfg.input_bins) * cfg.input_steps;
    std::vector<double> acc(cfg.tasks.size(), 0.0);
    std::vector<std::size_t> counts(cfg.tasks.size(), 0);
    ForwardCache cache;
    Tensor inputs;
    for (std::size_t lo = 0; lo < data.size(); lo += static_cast<std::size_t>(batch_size)) {
        std::size_t hi = std::min(data.size(), lo + static_cast<std::size_t>(batch_size));
        int n = static_cast<int>(hi - lo);
        ensure(inputs, {n, 1, cfg.input_bins, cfg.input_steps});
        for (std::size_t r = lo; r < hi; ++r) {
            if (data[r].input.size() != plane)
                throw std::invalid_argument("sample feature plane does not match net input shape");
            std::copy(data[r].input.v.begin(), data[r].input.v.end(),
                      inputs.v.begin() + static_cast<std::size_t>(r - lo) * plane);
        }
        forward_cached(net, inputs, cache);
        for (std::size_t k = 0; k < cfg.tasks.size(); ++k) {
            const TaskSpec& task = cfg.tasks[k];
            int dim = task.output_dim();
            for (std::size_t r = lo; r < hi; ++r) {
                auto it = data[r].labels.find(task.name);
                if (it == data[r].labels.end()) continue;
                const double* row =
                    cache.outputs[k].data() + static_cast<std::size_t>(r - lo) * dim;
                if (task.kind == TaskKind::kRegression) {
                    double pred = row[0] * net.stats[k].stddev + net.stats[k].mean;
                    double d = pred - it->second;
                    acc[k] += d * d;
                } else {
                    int best = 0;
                    for (int c = 1; c < dim; ++c)
                        if (row[c] > row[best]) best = c;
                    acc[k] += best == class_label(it->second, dim) ? 1.0 : 0.0;
                }
                ++counts[k];
            }
        }
    }
    std::map<std::string, double> metrics;
    for (std::size_t k = 0; k < cfg.tasks.size(); ++k) {
        if (counts[k] == 0)
            throw std::invalid_argument("task '" + cfg.tasks[k].name +
                                        "' has no labels in the evaluation set");
        metrics[cfg.tasks[k].name] = acc[k] / static_cast<double>(counts[k]);
    }
    return metrics;
}

TrainHistory train(MultiTaskNet& net, const SampleSet& train_set, const SampleSet& val_set,
                   const TrainSchedule& schedule) {
    if (train_set.empty()) throw std::invalid_argument("training set must be non-empty");
    if (val_set.empty()) throw std::invalid_argument("validation set must be non-empty");
    if (schedule.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    if (schedule.max_epochs < 1) throw std::invalid_argument("max epochs must be >= 1");
    if (schedule.patience < 0) throw std::invalid_argument("patience must be >= 0");
    const NetConfig& cfg = net.cfg;

    net.stats = label_statistics(cfg.tasks, train_set);

    // Rows that carry at least one label for a positively weighted task.
    std::vector<char> eligible(train_set.size(), 0);
    std::size_t eligible_count = 0;
    for (std::size_t i = 0; i < train_set.size(); ++i) {
        for (const TaskSpec& task : cfg.tasks) {
            if (task.weight <= 0.0) continue;
            if (train_set[i].labels.count(task.name)) {
                eligible[i] = 1;
                ++eligible_count;
                break;
            }
        }
    }
    if (eligible_count == 0)
        throw std::invalid_argument("no training example carries a positively weighted label");

    Rng shuffle_rng(mix_seed(cfg.rng_seed, 1));
    std::vector<std::size_t> all_idx = identity_order(train_set.size());
    std::vector<std::size_t> stream;
    stream.reserve(eligible_count);

    TrainHistory history;
    history.best_val_loss = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> best_params;
    best_params.reserve(net.params.size());
    for (const Param& p : net.params) best_params.push_back(p.value.v);

    ForwardCache cache;
    Gradients grads;
    Batch batch;
    int since_improved = 0;
    for (int epoch = 1; epoch <= schedule.max_epochs; ++epoch) {
        shuffle_rng.shuffle(all_idx);
        stream.clear();
        for (std::size_t i : all_idx)
            if (eligible[i]) stream.push_back(i);

        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t lo = 0; lo < stream.size();
             lo += static_cast<std::size_t>(schedule.batch_size)) {
            std::size_t hi =
                std::min(stream.size(), lo + static_cast<std::size_t>(schedule.batch_size));
            make_batch(train_set, stream, lo, hi, cfg, net.stats, batch);
            backward_into(net, batch, cache, grads);
            adam_step(net, grads);
            loss_sum += grads.loss;
            ++batches;
        }
        double train_loss = loss_sum / static_cast<double>(batches);
        double val_loss = dataset_loss(net, val_set, schedule.batch_size);
        if (!std::isfinite(train_loss) || !std::isfinite(val_loss))
            throw NumericError("training loss diverged at epoch " + std::to_string(epoch));
        history.train_loss.push_back(train_loss);
        history.val_loss.push_back(val_loss);
        history.epochs_run = epoch;

        if (val_loss < history.best_val_loss) {
            history.best_val_loss = val_loss;
            history.best_epoch = epoch;
            for (std::size_t p = 0; p < net.params.size(); ++p)
                best_params[p] = net.params[p].value.v;
            since_improved = 0;
        } else {
            ++since_improved;
        }
        if (since_improved >= schedule.patience) break;
    }
    for (std::size_t p = 0; p < net.params.size(); ++p) net.params[p].value.v = best_params[p];
    return history;
}

} // namespace gd::nn
