#include <stddef.h>

static unsigned char rotl(unsigned char b)
{
    return (unsigned char)((b << 1) | (b >> 7));
}

unsigned char checksum(const unsigned char *buf, size_t len)
{
    unsigned char sum = 0;
    size_t i;
    if (buf == NULL || len == 0)
        return 0xff;
    for (i = 0; i < len; i++) {
        sum = rotl(sum);
        sum ^= buf[i];
    }
    return sum;
}
