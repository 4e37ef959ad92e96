#pragma once
namespace equibound::harness { inline int cli_dispatch(int, char**) { return 0; } }
