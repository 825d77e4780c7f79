"""Shared fixtures: hand-framed WARC archives and a local file server.

The WARC bytes here are assembled by string formatting, not by the
package's own code, so framing tests compare two independent producers.
"""

from __future__ import annotations

import gzip
import json
import threading
import time
import uuid
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

from warc2corpus.manifest import JobManifest, save_manifest
from warc2corpus.segments import WarcSegmentRef

SAMPLE_CRAWL = "CC-MAIN-2019-04"
SAMPLE_SEGMENT = "1547583730728.68"
SAMPLE_FILE = "CC-MAIN-20190120184253-20190120210253-00091.warc.gz"
SAMPLE_WARC_URL = (
    "s3://commoncrawl/crawl-data/CC-MAIN-2019-04/segments/1547583730728.68/"
    "warc/CC-MAIN-20190120184253-20190120210253-00091.warc.gz"
)

# --------------------------------------------------------------------------
# WARC assembly


def http_response(
    body: bytes,
    content_type: str = "text/html; charset=UTF-8",
    status: int = 200,
    reason: str = "OK",
) -> bytes:
    head = (
        f"HTTP/1.1 {status} {reason}\r\n"
        f"Content-Type: {content_type}\r\n"
        f"Content-Length: {len(body)}\r\n"
        "\r\n"
    )
    return head.encode("ascii") + body


def http_request(host: str, path: str = "/") -> bytes:
    return f"GET {path} HTTP/1.1\r\nHost: {host}\r\nUser-Agent: fixture\r\n\r\n".encode("ascii")


_RECORD_SEQ = 0


def warc_record(
    record_type: str,
    payload: bytes,
    target_uri: str | None = None,
    content_type: str | None = None,
    warc_version: str = "WARC/1.0",
) -> bytes:
    global _RECORD_SEQ
    _RECORD_SEQ += 1
    record_id = uuid.UUID(int=_RECORD_SEQ, version=4)
    if content_type is None:
        if record_type == "response":
            content_type = "application/http; msgtype=response"
        elif record_type == "request":
            content_type = "application/http; msgtype=request"
        else:
            content_type = "application/warc-fields"
    lines = [
        warc_version,
        f"WARC-Type: {record_type}",
        "WARC-Date: 2019-01-20T19:00:00Z",
        f"WARC-Record-ID: <urn:uuid:{record_id}>",
    ]
    if target_uri is not None:
        lines.append(f"WARC-Target-URI: {target_uri}")
    lines.append(f"Content-Type: {content_type}")
    lines.append(f"Content-Length: {len(payload)}")
    head = "\r\n".join(lines).encode("ascii") + b"\r\n\r\n"
    return head + payload + b"\r\n\r\n"


def warcinfo_record() -> bytes:
    payload = b"software: fixture-builder/1.0\r\nformat: WARC File Format 1.0\r\n"
    return warc_record("warcinfo", payload)


def gzip_members(records: list[bytes]) -> bytes:
    """Common Crawl layout: each record is its own gzip member."""
    return b"".join(gzip.compress(r) for r in records)


def page_pair(url: str, html_body: bytes, content_type: str = "text/html; charset=UTF-8") -> list[bytes]:
    """A request/response record pair for one page."""
    host = url.split("://", 1)[1].split("/", 1)[0]
    return [
        warc_record("request", http_request(host), target_uri=url),
        warc_record("response", http_response(html_body, content_type), target_uri=url),
    ]


# --------------------------------------------------------------------------
# Page HTML

ES_CHROME_NAV = "<nav><ul><li>Inicio</li><li>Noticias</li><li>Contacto</li></ul></nav>"
ES_CHROME_FOOTER = (
    "<footer>Aviso legal y política de privacidad. Todos los derechos reservados. "
    "Escríbenos para cualquier consulta sobre esta página.</footer>"
)
EN_CHROME_NAV = "<nav><ul><li>Home</li><li>News</li><li>Contact</li></ul></nav>"
EN_CHROME_FOOTER = (
    "<footer>All rights reserved. Legal notice and terms of use. "
    "Write to us with any question about this page.</footer>"
)


def page_html(title: str, paragraphs: list[str], lang: str = "es") -> str:
    nav = ES_CHROME_NAV if lang == "es" else EN_CHROME_NAV
    footer = ES_CHROME_FOOTER if lang == "es" else EN_CHROME_FOOTER
    body = "\n".join(f"<p>{p}</p>" for p in paragraphs)
    return (
        "<!DOCTYPE html>\n"
        f'<html><head><meta charset="utf-8"><title>{title}</title>\n'
        '<script>var t = "tracking";</script>\n'
        "<style>body { font: 14px serif; }</style>\n"
        "</head>\n<body>\n"
        f"<header><h1>{title}</h1></header>\n"
        f"{nav}\n"
        "<article>\n"
        f"{body}\n"
        "</article>\n"
        f"{footer}\n"
        "</body></html>\n"
    )


# --------------------------------------------------------------------------
# Golden segment: 12 pages (6 Spanish, 4 English, 2 boilerplate-only)

GOLDEN_ES_PAGES = [
    (
        "http://teatro.ejemplo.es/estreno",
        "Estreno en el teatro principal",
        [
            "La compañía presentó anoche su nueva obra ante un público entregado que llenó el patio de butacas.",
            "Los actores ensayaron durante meses en un local prestado porque la sala grande estaba en reformas.",
            "Las funciones seguirán hasta finales de mes y luego la obra saldrá de gira por varias ciudades.",
        ],
    ),
    (
        "http://cocina.ejemplo.es/guiso",
        "Un guiso de toda la vida",
        [
            "Para preparar este guiso conviene dorar primero la carne a fuego fuerte y retirarla antes de sofreír la verdura.",
            "Cuando la cebolla esté transparente se añade el tomate rallado y se deja reducir sin prisa.",
            "El secreto está en cocerlo todo a fuego lento durante dos horas, removiendo de vez en cuando.",
        ],
    ),
    (
        "http://deporte.ejemplo.es/cronica",
        "Crónica del partido del domingo",
        [
            "El equipo local dominó la primera mitad pero se quedó sin fuelle tras el descanso y acabó pidiendo la hora.",
            "El entrenador reconoció en rueda de prensa que faltó frescura en los últimos minutos del encuentro.",
        ],
    ),
    (
        "http://barrio.ejemplo.es/mercado",
        "El mercado del barrio cumple cien años",
        [
            "Los puestos del mercado celebraron el centenario repartiendo flores y recetas antiguas entre los clientes.",
            "Varias generaciones de la misma familia han despachado fruta en el mismo mostrador desde mil novecientos veintitrés.",
            "El ayuntamiento prepara una exposición de fotografías históricas en la planta superior del edificio.",
        ],
    ),
    (
        "http://sierra.ejemplo.es/sendero",
        "Una ruta sencilla entre hayas",
        [
            "El sendero arranca junto al puente viejo y sube con suavidad entre hayas centenarias hasta el mirador.",
            "Conviene llevar calzado cómodo y agua, porque en todo el recorrido no hay ninguna fuente.",
        ],
    ),
    (
        "http://escuela.ejemplo.es/huerto",
        "Un huerto en el patio de la escuela",
        [
            "Los alumnos de cuarto plantaron tomates y lechugas en el huerto que han montado junto al gimnasio.",
            "Cada semana un grupo distinto se encarga de regar y de apuntar cuánto ha crecido cada planta.",
            "La cosecha se venderá en la fiesta del colegio para pagar la excursión de fin de curso.",
        ],
    ),
]

GOLDEN_EN_PAGES = [
    (
        "http://notes.example.com/harbor",
        "A walk along the old harbor",
        [
            "The old harbor smells of tar and salt, and the fishing boats still leave before the first light.",
            "A small museum by the pier keeps the logbooks of captains who sailed these waters a century ago.",
        ],
    ),
    (
        "http://notes.example.com/bakery",
        "The bakery on the corner",
        [
            "The bakery on the corner opens at six and the smell of warm bread drifts down the whole street.",
            "Regulars swear by the rye loaf, which sells out most mornings before nine o'clock.",
        ],
    ),
    (
        "http://notes.example.com/garden",
        "Notes from a small garden",
        [
            "This spring the peas came up early and the blackbirds took a keen interest in the seedbed.",
            "A row of sunflowers now shields the lettuce from the worst of the afternoon heat.",
        ],
    ),
    (
        "http://notes.example.com/trains",
        "Why I still take the slow train",
        [
            "The slow train stops at every village and the journey takes twice as long, which is exactly the point.",
            "You see orchards, back gardens and station cats that the express passengers never notice.",
        ],
    ),
]

BOILERPLATE_PAGES = [
    (
        "http://tienda.ejemplo.es/menu",
        "Tienda del barrio",
    ),
    (
        "http://portal.ejemplo.es/inicio",
        "Portal municipal",
    ),
]


def boilerplate_html(title: str) -> str:
    return (
        "<!DOCTYPE html>\n"
        f'<html><head><meta charset="utf-8"><title>{title}</title></head>\n'
        "<body>\n"
        "<header><h1>Bienvenidos a nuestra página oficial</h1></header>\n"
        "<nav><ul><li>Inicio</li><li>Productos</li><li>Ofertas</li><li>Contacto</li>"
        "<li>Aviso legal</li><li>Mapa web</li></ul></nav>\n"
        "<aside>Síguenos en las redes sociales para conocer todas las novedades.</aside>\n"
        f"{ES_CHROME_FOOTER}\n"
        "</body></html>\n"
    )


def golden_segment_records() -> list[bytes]:
    records = [warcinfo_record()]
    for url, title, paragraphs in GOLDEN_ES_PAGES[:1]:
        # First Spanish page arrives as windows-1252 with a declared header
        # charset, to exercise the decoding path inside the pipeline.
        body = page_html(title, paragraphs).encode("windows-1252")
        records.extend(page_pair(url, body, content_type="text/html; charset=windows-1252"))
    for url, title, paragraphs in GOLDEN_ES_PAGES[1:]:
        records.extend(page_pair(url, page_html(title, paragraphs).encode("utf-8")))
    for url, title, paragraphs in GOLDEN_EN_PAGES:
        records.extend(page_pair(url, page_html(title, paragraphs, lang="en").encode("utf-8")))
    for url, title in BOILERPLATE_PAGES:
        records.extend(page_pair(url, boilerplate_html(title).encode("utf-8")))
    # One page that is not an HTML 200: a missing page.
    records.extend(
        [
            warc_record(
                "request", http_request("gone.ejemplo.es"), target_uri="http://gone.ejemplo.es/x"
            ),
            warc_record(
                "response",
                http_response(b"<html><body>No encontrado</body></html>", status=404, reason="Not Found"),
                target_uri="http://gone.ejemplo.es/x",
            ),
        ]
    )
    return records


GOLDEN_LEDGER = {
    # 1 warcinfo + 13 request/response pairs
    "fetched": 27,
    "responses": 12,
    "decoded": 12,
    # 6 Spanish prose + 2 Spanish boilerplate pages pass the gate
    "lang_accepted": 8,
    "extracted": 6,
}


# --------------------------------------------------------------------------
# Satellite segments with planted duplicates
#
# The near duplicate edits the first word of the document and the last,
# so each paragraph differs from its original (exact-paragraph removal
# does not touch it) while the document shingle sets stay almost equal:
# an edge word sits in a single shingle window, so with both documents
# at 32 shingles the true Jaccard is 30/34.

_NEAR_DUP_SOURCE = GOLDEN_ES_PAGES[2]


def _near_dup_paragraphs() -> list[str]:
    first, second = _NEAR_DUP_SOURCE[2]
    first = "Nuestro" + first.removeprefix("El")
    second = second.removesuffix("encuentro.") + "choque."
    return [first, second]


SAT_A_PAGES = [
    # Exact duplicate of a golden page (same paragraphs, different URL).
    (
        "http://copia.ejemplo.es/estreno",
        "Estreno en el teatro principal",
        GOLDEN_ES_PAGES[0][2],
    ),
    # Near duplicate of the match report.
    (
        "http://copia.ejemplo.es/cronica",
        "Crónica del partido",
        _near_dup_paragraphs(),
    ),
    # Shares one exact paragraph with a golden page, adds two of its own.
    (
        "http://mixto.ejemplo.es/sendero",
        "Otra mirada al sendero",
        [
            GOLDEN_ES_PAGES[4][2][0],
            "Al final del verano el camino se llena de setas y conviene no salirse de la senda marcada.",
            "Desde el mirador se distingue el campanario del pueblo y, en días claros, la línea del mar.",
        ],
    ),
    # Fresh unique page.
    (
        "http://taller.ejemplo.es/bicis",
        "El taller de bicicletas",
        [
            "El taller de la calle mayor repara bicicletas antiguas y las presta a quien las necesite.",
            "Los sábados por la mañana enseñan a parchear ruedas a cambio de una sonrisa.",
        ],
    ),
]

SAT_B_PAGES = [
    # Fresh unique page.
    (
        "http://radio.ejemplo.es/entrevista",
        "Entrevista en la radio local",
        [
            "La emisora del pueblo entrevistó a la pastora que cruza el puerto con su rebaño cada junio.",
            "Contó que los perros conocen el camino mejor que ella y que el oficio se aprende andando.",
        ],
    ),
    # Exact duplicate of a satellite A page.
    (
        "http://espejo.ejemplo.es/bicis",
        "El taller de bicicletas",
        SAT_A_PAGES[3][2],
    ),
    # Both paragraphs are exact copies from two different golden pages,
    # so paragraph removal empties the document entirely.
    (
        "http://recorte.ejemplo.es/mezcla",
        "Recortes de otras páginas",
        [
            GOLDEN_ES_PAGES[5][2][1],
            GOLDEN_ES_PAGES[3][2][2],
        ],
    ),
]

SAT_B_EN_PAGE = (
    "http://notes.example.com/lighthouse",
    "The lighthouse keeper's diary",
    [
        "The keeper wrote one line each night, mostly about the wind and the ships that passed.",
        "His diary ends the week the light was automated, with the single word enough.",
    ],
)


def satellite_a_records() -> list[bytes]:
    records = [warcinfo_record()]
    for url, title, paragraphs in SAT_A_PAGES:
        records.extend(page_pair(url, page_html(title, paragraphs).encode("utf-8")))
    return records


def satellite_b_records() -> list[bytes]:
    records = [warcinfo_record()]
    for url, title, paragraphs in SAT_B_PAGES:
        records.extend(page_pair(url, page_html(title, paragraphs).encode("utf-8")))
    url, title, paragraphs = SAT_B_EN_PAGE
    records.extend(page_pair(url, page_html(title, paragraphs, lang="en").encode("utf-8")))
    return records


FIXTURE_LEDGER = {
    # golden 27 + two satellites of (1 warcinfo + 4 page pairs) each
    "fetched": 45,
    "responses": 20,
    "decoded": 20,
    # 15 Spanish-gated pages: golden 8, satellite A 4, satellite B 3
    "lang_accepted": 15,
    # the two boilerplate pages yield no paragraphs
    "extracted": 13,
    "exact_documents_removed": 2,
    "after_exact_documents": 11,
    "paragraphs_removed": 3,
    "documents_emptied": 1,
    "after_exact_paragraphs": 10,
    "near_duplicates_removed": 1,
    "after_lsh": 9,
    "written": 9,
}

GOLDEN_REF = WarcSegmentRef(SAMPLE_CRAWL, SAMPLE_SEGMENT, SAMPLE_FILE)
SAT_A_REF = WarcSegmentRef(
    SAMPLE_CRAWL, "1547583730728.69", "CC-MAIN-20190120184253-20190120210253-00092.warc.gz"
)
SAT_B_REF = WarcSegmentRef(
    SAMPLE_CRAWL, "1547583730728.70", "CC-MAIN-20190120184253-20190120210253-00093.warc.gz"
)


@pytest.fixture(scope="session")
def golden_warc(tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("golden") / SAMPLE_FILE
    path.write_bytes(gzip_members(golden_segment_records()))
    return path


@pytest.fixture(scope="session")
def fixture_manifest(tmp_path_factory, golden_warc) -> Path:
    """A three-segment manifest: the golden segment plus two satellites
    with planted exact, paragraph and near duplicates."""
    base = tmp_path_factory.mktemp("segments")
    sat_a = base / SAT_A_REF.file_name
    sat_a.write_bytes(gzip_members(satellite_a_records()))
    sat_b = base / SAT_B_REF.file_name
    sat_b.write_bytes(gzip_members(satellite_b_records()))
    manifest = JobManifest(
        segments=(GOLDEN_REF, SAT_A_REF, SAT_B_REF),
        shuffle_seed=0,
        created_at="2026-08-14T00:00:00+00:00",
        locations={
            GOLDEN_REF.key: str(golden_warc),
            SAT_A_REF.key: str(sat_a),
            SAT_B_REF.key: str(sat_b),
        },
    )
    path = base / "manifest.json"
    save_manifest(manifest, path)
    return path


# --------------------------------------------------------------------------
# Local HTTP server


class FileServer:
    """Serves a directory over HTTP with scriptable failures and an
    optional per-connection bandwidth cap."""

    def __init__(self, root: Path):
        self.root = root
        self.fail_first: dict[str, int] = {}
        self.throttle_bps: int | None = None
        self.request_count = 0
        self.last_headers: dict[str, str] = {}
        self._lock = threading.Lock()
        server = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args) -> None:
                pass

            def do_GET(self) -> None:
                with server._lock:
                    server.request_count += 1
                    server.last_headers = {k.lower(): v for k, v in self.headers.items()}
                    remaining = server.fail_first.get(self.path, 0)
                    if remaining > 0:
                        server.fail_first[self.path] = remaining - 1
                        self.send_error(503, "scripted failure")
                        return
                target = server.root / self.path.lstrip("/")
                if not target.is_file():
                    self.send_error(404)
                    return
                data = target.read_bytes()
                self.send_response(200)
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                if server.throttle_bps is None:
                    self.wfile.write(data)
                    return
                chunk = max(server.throttle_bps // 20, 1)
                for start in range(0, len(data), chunk):
                    self.wfile.write(data[start : start + chunk])
                    self.wfile.flush()
                    time.sleep(0.05)

        self._httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()

    @property
    def base_url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def url_for(self, name: str) -> str:
        return f"{self.base_url}/{name}"

    def close(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()


@pytest.fixture
def file_server(tmp_path):
    server = FileServer(tmp_path)
    yield server
    server.close()


def load_jsonl(path: Path) -> list[dict]:
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line]
