#pragma once

#include "dhmp/errors.hpp"
#include "dhmp/matrix.hpp"
#include "dhmp/graph.hpp"
#include "dhmp/tensor.hpp"
#include "dhmp/params.hpp"
#include "dhmp/gradcheck.hpp"
#include "dhmp/separator.hpp"
#include "dhmp/propagation.hpp"
#include "dhmp/metrics.hpp"
#include "dhmp/sampling.hpp"
#include "dhmp/model.hpp"
#include "dhmp/trainer.hpp"
#include "dhmp/synthetic.hpp"
#include "dhmp/io.hpp"
#include "dhmp/verify.hpp"
