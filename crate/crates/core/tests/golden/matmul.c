static inline long floord(long n, long d) { return n >= 0 ? n / d : -((-n + d - 1) / d); }
static inline long min(long a, long b) { return a < b ? a : b; }
static inline long max(long a, long b) { return a > b ? a : b; }
static inline int lf_disjoint(const void *a, long an, const void *b, long bn) { return (const char *)a + an <= (const char *)b || (const char *)b + bn <= (const char *)a; }

void matmul(int M, int N, int K, double C[M][N], double A[M][K], double B[K][N]) {
  double Packed_B[2048][256];
  double Packed_A[96][256];
  if (lf_disjoint(C, sizeof(double) * M * N, A, sizeof(double) * M * K) && lf_disjoint(C, sizeof(double) * M * N, B, sizeof(double) * K * N)) {
    for (int c0 = 0; c0 <= floord(N - 1, 2048); c0 += 1)
      for (int c1 = 0; c1 <= floord(K - 1, 256); c1 += 1) {
        for (int c2 = 0; c2 <= min(2047, N - 2048 * c0 - 1); c2 += 1)
          for (int c3 = 0; c3 <= min(255, K - 256 * c1 - 1); c3 += 1)
            Packed_B[c2][c3] = B[256 * c1 + c3][2048 * c0 + c2];
        for (int c2 = 0; c2 <= floord(M - 1, 96); c2 += 1) {
          for (int c3 = 0; c3 <= min(95, M - 96 * c2 - 1); c3 += 1)
            for (int c4 = 0; c4 <= min(255, K - 256 * c1 - 1); c4 += 1)
              Packed_A[c3][c4] = A[96 * c2 + c3][256 * c1 + c4];
          for (int c3 = 0; c3 <= min(2047, N - 2048 * c0 - 1); c3 += 1)
            for (int c4 = 0; c4 <= min(95, M - 96 * c2 - 1); c4 += 1)
              for (int c5 = 0; c5 <= min(255, K - 256 * c1 - 1); c5 += 1)
                C[96 * c2 + c4][2048 * c0 + c3] += Packed_A[c4][c5] * Packed_B[c3][c5];
        }
      }
  } else {
    for (int i = 0; i < M; i += 1)
      for (int j = 0; j < N; j += 1)
        for (int k = 0; k < K; k += 1)
          C[i][j] += A[i][k] * B[k][j];
  }
}
