#pragma once

#include "ctnet/basis.hpp"
#include "ctnet/checkpoint.hpp"
#include "ctnet/common.hpp"
#include "ctnet/data.hpp"
#include "ctnet/gradients.hpp"
#include "ctnet/integrators.hpp"
#include "ctnet/model.hpp"
#include "ctnet/optimizer.hpp"
#include "ctnet/runner.hpp"
#include "ctnet/runspec.hpp"
