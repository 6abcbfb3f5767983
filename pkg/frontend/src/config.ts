/** Client configuration: where the service lives and how to authenticate. */
export interface ApiConfig {
  baseUrl: string;
  token?: string;
}

/**
 * Read configuration from the page URL, e.g.
 * index.html?api=http://127.0.0.1:8337&token=secret
 * An empty api parameter means same-origin.
 */
export function configFromPage(search: string = window.location.search): ApiConfig {
  const params = new URLSearchParams(search);
  const baseUrl = (params.get("api") ?? "").replace(/\/+$/, "");
  const token = params.get("token");
  return token ? { baseUrl, token } : { baseUrl };
}
