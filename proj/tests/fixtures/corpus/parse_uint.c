#define MAX_DIGITS 9

int parse_uint(const char *s, unsigned int *out)
{
    unsigned int v = 0;
    int n = 0;
    if (!s || !*s)
        return -1;
    for (; *s; s++, n++) {
        if (*s < '0' || *s > '9')
            return -1;
        if (n >= MAX_DIGITS)
            return -2;
        v = v * 10 + (unsigned int)(*s - '0');
    }
    *out = v;
    return n;
}
