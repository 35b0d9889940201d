#!/usr/bin/env python3
"""Writes default_corpus_spec.json, the bundled synthetic population.

Twelve OS profiles with host counts at 1/18 of the April 2017 enterprise
census (minimum three hosts). Fingerprint pools are built from a handful of
TLS stacks, TCP option layouts and User-Agent templates; related versions
share most of their pools so single fingerprints are ambiguous while
combinations are not.
"""
import json
import random
from pathlib import Path

GREASE = 2570


def esc(s):
    return s.replace("\\", "\\\\").replace("(", "\\(").replace(")", "\\)")


def tcp(ttl, opts):
    parts = []
    for o in opts:
        parts.append("(%d)" % o if isinstance(o, int) else "(%d=%s)" % o)
    return "tcp/%d:%s" % (ttl, "".join(parts))


def u16(v):
    return "%04x" % v


def groups(gs):
    return u16(2 * len(gs)) + "".join(u16(g) for g in gs)


def points(ps):
    return "%02x" % len(ps) + "".join("%02x" % p for p in ps)


def alpn(names):
    body = "".join("%02x" % len(n) + n.encode().hex() for n in names)
    return u16(len(body) // 2) + body


def tls(ciphers, exts):
    c = "".join("(%d)" % x for x in ciphers)
    e = "".join("(%d)" % x if isinstance(x, int) else "(%d=%s)" % x for x in exts)
    return "tls/%s|%s" % (c, e)


def http(ua):
    return "http/(0=%s)" % esc(ua)


# ---------------------------------------------------------------- TLS stacks
X25519, P256, P384, P521 = 0x1d, 0x17, 0x18, 0x19
H2 = ["h2", "http/1.1"]
SPDY = ["h2", "spdy/3.1", "http/1.1"]

STACKS = {
    "chrome": (
        [GREASE, 0xc02b, 0xc02f, 0xc02c, 0xc030, 0xcca9, 0xcca8, 0xcc14, 0xcc13, 0xc013, 0xc014, 0x9c, 0x9d, 0x2f, 0x35, 0x0a],
        [GREASE, 0xff01, 0, 23, 35, 13, 5, 18, (16, alpn(H2)), 30032, (11, points([0])), (10, groups([GREASE, X25519, P256, P384])), GREASE],
    ),
    "firefox": (
        [0xc02b, 0xc02f, 0xcca9, 0xcca8, 0xc02c, 0xc030, 0xc00a, 0xc009, 0xc013, 0xc014, 0x33, 0x39, 0x2f, 0x35, 0x0a],
        [0, 23, 0xff01, (10, groups([X25519, P256, P384, P521])), (11, points([0])), 35, (16, alpn(H2)), 5, 13],
    ),
    "schannel7": (
        [0xc028, 0xc027, 0xc014, 0xc013, 0x9f, 0x9e, 0x39, 0x33, 0x9d, 0x9c, 0x3d, 0x3c, 0x35, 0x2f, 0xc02c, 0xc02b, 0xc024, 0xc023, 0xc00a, 0xc009, 0x6a, 0x40, 0x38, 0x32, 0x0a, 0x13],
        [0, 5, (10, groups([P256, P384])), (11, points([0])), 13, 35, 23, 0xff01],
    ),
    "schannel10": (
        [0xc02c, 0xc02b, 0xc030, 0xc02f, 0xc024, 0xc023, 0xc028, 0xc027, 0xc00a, 0xc009, 0xc014, 0xc013, 0x9d, 0x9c, 0x3d, 0x3c, 0x35, 0x2f, 0x0a],
        [0, 5, (10, groups([P256, P384])), (11, points([0])), 13, 35, 23, 0xff01],
    ),
    "schannel10_1607": (
        [0xc02c, 0xc02b, 0xc030, 0xc02f, 0xc024, 0xc023, 0xc028, 0xc027, 0xc00a, 0xc009, 0xc014, 0xc013, 0x9d, 0x9c, 0x3d, 0x3c, 0x35, 0x2f, 0x0a],
        [0, 5, (10, groups([X25519, P256, P384])), (11, points([0])), 13, 35, (16, alpn(H2)), 23, 0xff01],
    ),
    "securetransport": (
        [0xff, 0xc02c, 0xc02b, 0xc024, 0xc023, 0xc00a, 0xc009, 0xc008, 0xc030, 0xc02f, 0xc028, 0xc027, 0xc014, 0xc013, 0xc012, 0x9d, 0x9c, 0x3d, 0x3c, 0x35, 0x2f, 0x0a],
        [0, (10, groups([P256, P384, P521])), (11, points([0])), 13, 13172, (16, alpn(SPDY)), 5, 18, 23],
    ),
    "securetransport_old": (
        [0xff, 0xc024, 0xc023, 0xc00a, 0xc009, 0xc008, 0xc028, 0xc027, 0xc014, 0xc013, 0xc012, 0x3d, 0x3c, 0x35, 0x2f, 0x0a, 0x05, 0x04],
        [0, (10, groups([P256, P384, P521])), (11, points([0])), 13, 13172, 5],
    ),
    "boringssl_ios": (
        [0xc02c, 0xc02b, 0xcca9, 0xc030, 0xc02f, 0xcca8, 0xc00a, 0xc009, 0xc014, 0xc013, 0x9d, 0x9c, 0x35, 0x2f],
        [0xff01, 0, 23, 13, 5, 13172, 18, (16, alpn(H2)), (11, points([0])), (10, groups([X25519, P256, P384]))],
    ),
}

VARIANT_ALPN = [["http/1.1"], ["h2"], ["spdy/3.1", "http/1.1"], ["h2", "h2-14", "http/1.1"]]


def variants(stack, count, rng):
    """Distinct application-level variations of one TLS stack."""
    ciphers, exts = STACKS[stack]
    seen, out = set(), []
    base = tls(ciphers, exts)
    seen.add(base)
    out.append(base)
    while len(out) < count:
        c, e = list(ciphers), list(exts)
        for _ in range(rng.randint(1, 3)):
            op = rng.randrange(5)
            if op == 0 and len(c) > 4:
                del c[rng.randrange(1, len(c))]
            elif op == 1 and len(c) > 3:
                i = rng.randrange(1, len(c) - 1)
                c[i], c[i + 1] = c[i + 1], c[i]
            elif op == 2:
                e = [x for x in e if not (isinstance(x, tuple) and x[0] == 16)]
                e.insert(rng.randrange(1, len(e)), (16, alpn(rng.choice(VARIANT_ALPN))))
            elif op == 3 and len(e) > 4:
                i = rng.randrange(1, len(e))
                if e[i] != 0:
                    del e[i]
            else:
                extra = rng.choice([0x0f, 0x15, 0x12, 0x17, 0x1c])
                if extra not in e:
                    e.insert(rng.randrange(1, len(e) + 1), extra)
        fp = tls(c, e)
        if fp not in seen:
            seen.add(fp)
            out.append(fp)
    return out


def zipf(fps, s=1.0):
    return [(fp, 1.0 / (i + 1) ** s) for i, fp in enumerate(fps)]


def mix(*parts):
    """Mixture of (weight, [(fp, w)]) components, normalized."""
    acc = {}
    order = []
    for weight, items in parts:
        total = sum(w for _, w in items)
        for fp, w in items:
            if fp not in acc:
                acc[fp] = 0.0
                order.append(fp)
            acc[fp] += weight * w / total
    total = sum(acc.values())
    return [{"fp": fp, "p": round(acc[fp] / total, 12)} for fp in order]


def renormalize(dist):
    total = sum(d["p"] for d in dist)
    for d in dist:
        d["p"] = d["p"] / total
    return dist


# ---------------------------------------------------------------- TCP layouts
def win_tcp(ws, mss=1460):
    return tcp(128, [(2, str(mss)), 1, (3, str(ws)), 1, 1, 4])


def mac_tcp(ws, mss=1460):
    return tcp(64, [(2, str(mss)), 1, (3, str(ws)), 1, 1, 8, 4, 0, 0])


# The VPN concentrator clamps MSS to 1260, so one layout per family dominates;
# stack-specific layouts show up in a minority of each host's connections.
WIN_COMMON = win_tcp(8, 1260)
WIN_LAN = win_tcp(8)
WIN_SPECIFIC = {
    "6.1": win_tcp(2, 1260),
    "10.0.1058": tcp(128, [(2, "1260"), 1, 1, 4]),
    "10.0.1439": tcp(128, [(2, "1260"), 1, (3, "8"), 4]),
}
MAC_COMMON = mac_tcp(5, 1260)
MAC_LAN = mac_tcp(5)
MAC_SPECIFIC = {
    "10.12": mac_tcp(6, 1260),
    "10.11": mac_tcp(4, 1260),
    "10.10": mac_tcp(3, 1260),
    "10.9": tcp(64, [(2, "1260"), 1, (3, "4"), 1, 1, 8, 4, 0]),
}
IOS_COMMON = mac_tcp(6, 1260)
IOS_SPECIFIC = tcp(64, [(2, "1240"), 1, (3, "6"), 1, 1, 8, 4, 0, 0])


def tcp_dist(common, specific, lan):
    return mix((0.78, [(common, 1)]), (0.16, [(specific, 1)]), (0.06, [(lan, 1)]))


# ---------------------------------------------------------------- User agents
FF = "Mozilla/5.0 ({os}; rv:52.0) Gecko/20100101 Firefox/52.0"
CHROME = "Mozilla/5.0 ({os}) AppleWebKit/537.36 (KHTML, like Gecko) Chrome/57.0.2987.133 Safari/537.36"
CHROME58 = "Mozilla/5.0 ({os}) AppleWebKit/537.36 (KHTML, like Gecko) Chrome/58.0.3029.81 Safari/537.36"
WIN_SHARED_UA = ["Microsoft NCSI", "WinHttpClient", "Microsoft BITS/7.8", "Windows-Update-Agent/10.0.10011.16384 Client-Protocol/1.40"]


def win_uas(nt, extra):
    return [
        FF.format(os="Windows NT %s; WOW64" % nt),
        CHROME.format(os="Windows NT %s; Win64; x64" % nt),
        CHROME58.format(os="Windows NT %s; WOW64" % nt),
        "Microsoft-CryptoAPI/%s" % nt,
    ] + extra


def mac_uas(minor, dotted, darwin, cfnet, safari):
    under = dotted.replace(".", "_")
    return (
        [FF.format(os="Macintosh; Intel Mac OS X %s" % minor)],
        [
            CHROME.format(os="Macintosh; Intel Mac OS X %s" % under),
            "Mozilla/5.0 (Macintosh; Intel Mac OS X %s) AppleWebKit/%s (KHTML, like Gecko) Version/%s Safari/%s"
            % (under, safari[0], safari[1], safari[0]),
            "com.apple.trustd/1.0 CFNetwork/%s Darwin/%s" % (cfnet, darwin),
            "Microsoft Office/15.0 (Mac OS X %s; Microsoft Outlook 15.33)" % dotted,
        ],
    )


def ios_uas(dotted, build, darwin, cfnet, device):
    under = dotted.replace(".", "_")
    return [
        "Mozilla/5.0 (iPhone; CPU iPhone OS %s like Mac OS X) AppleWebKit/602.4.6 (KHTML, like Gecko) Version/10.0 Mobile/%s Safari/602.1"
        % (under, build),
        "%s/%s (%s)" % (device, dotted, build),
        "com.apple.Maps/1.0 CFNetwork/%s Darwin/%s" % (cfnet, darwin),
        "Mail/3259 CFNetwork/%s Darwin/%s" % (cfnet, darwin),
    ]


def build():
    rng = random.Random(20170410)
    chrome_win = variants("chrome", 18, rng)
    firefox_win = variants("firefox", 10, rng)
    schannel7 = variants("schannel7", 16, rng)
    schannel10 = variants("schannel10", 16, rng)
    schannel1607 = variants("schannel10_1607", 12, rng)
    chrome_mac = variants("chrome", 14, rng)[1:]  # the base hello is shared with Windows
    firefox_mac = variants("firefox", 8, rng)[1:]
    st = variants("securetransport", 30, rng)
    st_old = variants("securetransport_old", 16, rng)
    ios = variants("boringssl_ios", 16, rng)

    win_shared = zipf(chrome_win + firefox_win, 0.7)
    mac_shared = zipf([chrome_win[0], firefox_win[0]] + chrome_mac + firefox_mac, 0.7)

    profiles = []

    def add(label, hosts, rate, presence, http_hosts, pool, fps):
        profiles.append(
            {
                "label": label,
                "host_count": hosts,
                "flows_per_active_hour": {"median": rate, "sigma": 0.45},
                "presence": dict(zip(("tcp", "tls", "http"), presence)),
                "http_host_fraction": http_hosts,
                "host_pool": dict(zip(("tcp", "tls", "http"), pool)),
                "fingerprints": {k: renormalize(v) for k, v in fps.items()},
            }
        )

    win_pool = (2, 21, 6)
    win_presence = (0.95, 0.70, 0.22)
    win_ua_shared = [(http(u), w) for u, w in zip(WIN_SHARED_UA, [4, 2, 1, 1])]

    add("Win 6.1.760 SP1", 125, 32, win_presence, 0.75, win_pool, {
        "tcp": tcp_dist(WIN_COMMON, WIN_SPECIFIC["6.1"], WIN_LAN),
        "tls": mix((0.55, win_shared), (0.45, zipf(schannel7, 0.8))),
        "http": mix((0.35, win_ua_shared), (0.65, zipf([http(u) for u in win_uas("6.1", [
            "Mozilla/5.0 (Windows NT 6.1; WOW64; Trident/7.0; rv:11.0) like Gecko",
            "Microsoft Office/14.0 (Windows NT 6.1; Microsoft Outlook 14.0.7180; Pro)"])]))),
    })
    win10_uas = win_uas("10.0", [])
    add("Win 10.0.1058", 97, 32, win_presence, 0.75, win_pool, {
        "tcp": tcp_dist(WIN_COMMON, WIN_SPECIFIC["10.0.1058"], WIN_LAN),
        "tls": mix((0.55, win_shared), (0.35, zipf(schannel10, 0.8)), (0.10, zipf(schannel1607[:4], 0.8))),
        "http": mix((0.35, win_ua_shared), (0.65, zipf([http(u) for u in win10_uas + [
            "Mozilla/5.0 (Windows NT 10.0; Win64; x64) AppleWebKit/537.36 (KHTML, like Gecko) Chrome/51.0.2704.79 Safari/537.36 Edge/13.10586"]]))),
    })
    add("Win 10.0.1439", 22, 32, win_presence, 0.75, win_pool, {
        "tcp": tcp_dist(WIN_COMMON, WIN_SPECIFIC["10.0.1439"], WIN_LAN),
        "tls": mix((0.55, win_shared), (0.15, zipf(schannel10[:6], 0.8)), (0.30, zipf(schannel1607, 0.8))),
        "http": mix((0.35, win_ua_shared), (0.65, zipf([http(u) for u in win10_uas + [
            "Mozilla/5.0 (Windows NT 10.0; Win64; x64) AppleWebKit/537.36 (KHTML, like Gecko) Chrome/52.0.2743.116 Safari/537.36 Edge/14.14393"]]))),
    })

    mac_pool = (2, 21, 6)
    mac_presence = (0.95, 0.70, 0.24)

    def mac(label, hosts, minor, dotted, darwin, cfnet, safari, st_major, st_minor):
        shared_ua, specific_ua = mac_uas(minor, dotted, darwin, cfnet, safari)
        add(label, hosts, 28, mac_presence, 0.7, mac_pool, {
            "tcp": tcp_dist(MAC_COMMON, MAC_SPECIFIC[minor], MAC_LAN),
            "tls": mix((0.45, mac_shared), (0.35, zipf(st_major, 0.8)), (0.20, zipf(st_minor, 0.8))),
            "http": mix((0.45, zipf([http(u) for u in shared_ua] + [http("Microsoft Office/15.0 (Mac OS X; Microsoft Word 15.33)")])),
                        (0.55, zipf([http(u) for u in specific_ua]))),
        })

    st1012 = st[:14]
    mac("OSX 10.11.6", 72, "10.11", "10.11.6", "15.6.0", "760.6.3", ("601.7.7", "9.1.2"), st[10:22], st[22:26])
    mac("OSX 10.12.4", 36, "10.12", "10.12.4", "16.5.0", "811.4.18", ("603.1.30", "10.1"), st1012, st[26:28] + [st[0]])
    mac("OSX 10.12.3", 15, "10.12", "10.12.3", "16.4.0", "811.3.6", ("602.4.8", "10.0.3"), st1012, st[28:30] + [st[1]])
    mac("OSX 10.10.5", 11, "10.10", "10.10.5", "14.5.0", "720.5.7", ("600.8.9", "8.0.8"), st_old[:10], st_old[10:13])
    mac("OSX 10.12.2", 3, "10.12", "10.12.2", "16.3.0", "808.3", ("602.3.12", "10.0.2"), st1012, [st[2], st[3]])
    mac("OSX 10.9.5", 3, "10.9", "10.9.5", "13.4.0", "673.6", ("537.85.17", "7.1.8"), st_old[4:14], st_old[13:16])
    mac("OSX 10.12.5", 3, "10.12", "10.12.5", "16.6.0", "811.5.4", ("603.2.4", "10.1.1"), st1012, [st[4], st[5]])

    def iphone(label, hosts, dotted, build_id, darwin, cfnet, device, tls_specific):
        add(label, hosts, 14, (0.95, 0.80, 0.12), 0.6, (2, 12, 3), {
            "tcp": tcp_dist(IOS_COMMON, IOS_SPECIFIC, MAC_LAN),
            "tls": mix((0.7, zipf(ios[:12], 0.8)), (0.3, zipf(tls_specific, 0.8))),
            "http": mix((1.0, zipf([http(u) for u in ios_uas(dotted, build_id, darwin, cfnet, device)]))),
        })

    iphone("iOS 10.2.1", 12, "10.2.1", "14D27", "16.3.0", "808.2.16", "iPhone9,3", ios[12:14] + [st[6]])
    iphone("iOS 10.3.1", 4, "10.3.1", "14E304", "16.5.0", "811.4.18", "iPhone8,1", ios[14:16] + [st[7]])

    return {
        "days": 6,
        "start_time": 1491782400,
        "seed": 42,
        "activity": {
            "day_active_prob": 0.8,
            "block_hours_min": 2.0,
            "block_hours_max": 6.0,
            "block_start_min_hour": 7.0,
            "block_start_max_hour": 17.0,
        },
        "profiles": profiles,
    }


if __name__ == "__main__":
    out = Path(__file__).with_name("default_corpus_spec.json")
    out.write_text(json.dumps(build(), indent=1) + "\n")
    print("wrote", out)
