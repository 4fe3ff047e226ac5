// Copyright (c) 2026 the higen authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
int main() { std::cout << "acceptance placeholder\n"; return 1; }
