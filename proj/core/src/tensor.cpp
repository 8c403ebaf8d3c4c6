#include "llvd/tensor.hpp"

#include <cmath>
#include <sstream>

namespace llvd {

int64_t shape_numel(const std::vector<int64_t>& dims) {
  int64_t n = 1;
  for (int64_t d : dims) n *= d;
  return n;
}

std::string shape_str(const std::vector<int64_t>& dims) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < dims.size(); ++i) {
    if (i) os << "x";
    os << dims[i];
  }
  os << "]";
  return os.str();
}

namespace {
void check_dims(const std::vector<int64_t>& dims) {
  for (int64_t d : dims) {
    if (d < 1) throw ShapeError("tensor extent must be >= 1, got " + shape_str(dims));
  }
}
}  // namespace

template <typename S>
TensorT<S> TensorT<S>::zeros(std::vector<int64_t> dims) {
  check_dims(dims);
  TensorT t;
  t.values = std::make_shared<std::vector<S>>(shape_numel(dims), S(0));
  t.dims = std::move(dims);
  return t;
}

template <typename S>
TensorT<S> TensorT<S>::full(std::vector<int64_t> dims, S value) {
  check_dims(dims);
  TensorT t;
  t.values = std::make_shared<std::vector<S>>(shape_numel(dims), value);
  t.dims = std::move(dims);
  return t;
}

template <typename S>
TensorT<S> TensorT<S>::from(std::vector<int64_t> dims, std::vector<S> data) {
  check_dims(dims);
  if (shape_numel(dims) != static_cast<int64_t>(data.size())) {
    throw ShapeError("tensor data size " + std::to_string(data.size()) +
                     " does not match shape " + shape_str(dims));
  }
  TensorT t;
  t.values = std::make_shared<std::vector<S>>(std::move(data));
  t.dims = std::move(dims);
  return t;
}

template <typename S>
int64_t TensorT<S>::numel() const {
  return values ? static_cast<int64_t>(values->size()) : 0;
}

template <typename S>
S& TensorT<S>::at4(int64_t n, int64_t c, int64_t h, int64_t w) {
  return (*values)[((n * dims[1] + c) * dims[2] + h) * dims[3] + w];
}

template <typename S>
S TensorT<S>::at4(int64_t n, int64_t c, int64_t h, int64_t w) const {
  return (*values)[((n * dims[1] + c) * dims[2] + h) * dims[3] + w];
}

template <typename S>
TensorT<S> TensorT<S>::clone() const {
  TensorT t;
  t.dims = dims;
  t.values = std::make_shared<std::vector<S>>(*values);
  t.requires_grad = requires_grad;
  return t;
}

template <typename S>
bool TensorT<S>::all_finite() const {
  for (S v : *values) {
    if (!std::isfinite(static_cast<double>(v))) return false;
  }
  return true;
}

template <typename S>
void require_same_shape(const TensorT<S>& a, const TensorT<S>& b, const char* op) {
  if (a.dims != b.dims) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.dims) +
                     " vs " + shape_str(b.dims));
  }
}

template <typename S>
TensorT<double> to_double(const TensorT<S>& t) {
  std::vector<double> out(t.values->begin(), t.values->end());
  return TensorT<double>::from(t.dims, std::move(out));
}

template <typename S>
TensorT<float> to_float(const TensorT<S>& t) {
  std::vector<float> out(t.values->begin(), t.values->end());
  return TensorT<float>::from(t.dims, std::move(out));
}

template <typename S>
TensorT<S> stack_batch(const std::vector<TensorT<S>>& items) {
  if (items.empty()) throw ValueError("stack_batch: empty input");
  for (const auto& it : items) {
    if (it.rank() != 3) throw ShapeError("stack_batch: expected rank-3 items, got " + shape_str(it.dims));
    if (it.dims != items[0].dims) {
      throw ShapeError("stack_batch: mixed shapes " + shape_str(items[0].dims) + " vs " + shape_str(it.dims));
    }
  }
  const auto& d = items[0].dims;
  TensorT<S> out = TensorT<S>::zeros({static_cast<int64_t>(items.size()), d[0], d[1], d[2]});
  int64_t per = shape_numel(d);
  for (size_t i = 0; i < items.size(); ++i) {
    std::copy(items[i].values->begin(), items[i].values->end(), out.values->begin() + per * i);
  }
  return out;
}

template <typename S>
std::vector<TensorT<S>> unstack_batch(const TensorT<S>& batch) {
  if (batch.rank() != 4) throw ShapeError("unstack_batch: expected rank-4, got " + shape_str(batch.dims));
  std::vector<TensorT<S>> out;
  int64_t per = batch.dims[1] * batch.dims[2] * batch.dims[3];
  for (int64_t n = 0; n < batch.dims[0]; ++n) {
    std::vector<S> buf(batch.values->begin() + n * per, batch.values->begin() + (n + 1) * per);
    out.push_back(TensorT<S>::from({batch.dims[1], batch.dims[2], batch.dims[3]}, std::move(buf)));
  }
  return out;
}

template struct TensorT<float>;
template struct TensorT<double>;
template void require_same_shape<float>(const TensorT<float>&, const TensorT<float>&, const char*);
template void require_same_shape<double>(const TensorT<double>&, const TensorT<double>&, const char*);
template TensorT<double> to_double<float>(const TensorT<float>&);
template TensorT<double> to_double<double>(const TensorT<double>&);
template TensorT<float> to_float<float>(const TensorT<float>&);
template TensorT<float> to_float<double>(const TensorT<double>&);
template TensorT<float> stack_batch<float>(const std::vector<TensorT<float>>&);
template TensorT<double> stack_batch<double>(const std::vector<TensorT<double>>&);
template std::vector<TensorT<float>> unstack_batch<float>(const TensorT<float>&);
template std::vector<TensorT<double>> unstack_batch<double>(const TensorT<double>&);

}  // namespace llvd
