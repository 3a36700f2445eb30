#include "mva/gradcheck.h"

#include <algorithm>
#include <cmath>

namespace mva {
namespace {

double evaluate(const ScalarFn& f, const std::vector<Tensor>& params) {
    std::vector<Var> vars;
    vars.reserve(params.size());
    for (const auto& p : params) vars.push_back(constant(p));
    const Var out = f(vars);
    if (out.value().numel() != 1) {
        throw ShapeError("gradcheck: function must return a scalar, got " +
                         shape_string(out.shape()));
    }
    return out.value()[0];
}

}  // namespace

GradcheckReport gradcheck(const ScalarFn& f, const std::vector<Tensor>& params, double h,
                          double tol) {
    std::vector<Var> leaves;
    leaves.reserve(params.size());
    for (const auto& p : params) leaves.push_back(parameter(p.to(DType::f64)));
    backward(f(leaves));

    GradcheckReport report;
    std::vector<Tensor> work;
    for (const auto& p : params) work.push_back(p.to(DType::f64));
    for (std::size_t pi = 0; pi < work.size(); ++pi) {
        const Tensor analytic = leaves[pi].grad();
        for (std::size_t i = 0; i < work[pi].numel(); ++i) {
            auto data = work[pi].mutable_data();
            const double saved = data[i];
            data[i] = saved + h;
            const double up = evaluate(f, work);
            data = work[pi].mutable_data();
            data[i] = saved - h;
            const double down = evaluate(f, work);
            work[pi].mutable_data()[i] = saved;

            const double fd = (up - down) / (2.0 * h);
            const double err = std::fabs(analytic[i] - fd) / std::max(1.0, std::fabs(fd));
            ++report.checked;
            if (err > report.max_rel_err || std::isnan(err)) {
                report.max_rel_err = std::isnan(err) ? INFINITY : err;
                report.worst_param = pi;
                report.worst_index = i;
            }
        }
    }
    report.pass = report.max_rel_err <= tol;
    return report;
}

}  // namespace mva
