#pragma once

#include "futi/tensor.hpp"
#include "futi/random.hpp"
#include "futi/lbp.hpp"
#include "futi/nn.hpp"
#include "futi/models.hpp"
#include "futi/checkpoint.hpp"
#include "futi/png_io.hpp"
#include "futi/data.hpp"
#include "futi/eval.hpp"
#include "futi/config.hpp"
