#pragma once

#include "vslctl/analysis.hpp"
#include "vslctl/config.hpp"
#include "vslctl/errors.hpp"
#include "vslctl/fixed_inlet.hpp"
#include "vslctl/free_inlet.hpp"
#include "vslctl/fundamental_diagram.hpp"
#include "vslctl/io.hpp"
#include "vslctl/pde_oracle.hpp"
#include "vslctl/profile.hpp"
#include "vslctl/runner.hpp"
#include "vslctl/scenario.hpp"
#include "vslctl/trace.hpp"
